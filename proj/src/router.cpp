#include "cascade/router.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "cascade/backends.hpp"
#include "cascade/csv.hpp"
#include "cascade/metrics.hpp"

namespace cascade {

using nlohmann::json;

std::string_view to_string(Route r) { return r == Route::local ? "LOCAL" : "LLM"; }

std::string_view to_string(UnparsedPolicy p) {
  return p == UnparsedPolicy::fallback_local ? "fallback_local" : "error";
}

UnparsedPolicy unparsed_policy_from_string(std::string_view name) {
  if (name == "fallback_local") return UnparsedPolicy::fallback_local;
  if (name == "error") return UnparsedPolicy::error;
  throw InputError(fmt::format("unknown unparsed policy '{}' (expected fallback_local or error)", name));
}

void RouterConfig::validate() const {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw InputError(fmt::format("threshold must lie in (0, 1], got {}", threshold));
  }
  backend.validate();
}

namespace {

void check_alignment(const EmbeddingMatrix& embeddings, const Corpus& docs) {
  if (embeddings.rows() != docs.size()) {
    throw InputError(fmt::format("{} embedding rows for {} documents", embeddings.rows(), docs.size()));
  }
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (embeddings.ids()[i] != docs[i].id) {
      throw InputError(fmt::format("embedding row {} is '{}' but document {} is '{}'", i, embeddings.ids()[i], i,
                                   docs[i].id));
    }
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Applies verdicts to the routed positions. `verdicts[j]` belongs to routed[j].
std::vector<RoutingOutcome> assemble(std::span<const ProbabilityVector> probs, const Corpus& docs,
                                     UnparsedPolicy policy, const std::vector<std::size_t>& routed,
                                     const std::vector<const LlmVerdict*>& verdicts) {
  std::vector<RoutingOutcome> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    auto& o = out[i];
    o.document_id = docs[i].id;
    o.confidence = probs[i].confidence;
    o.local_label = probs[i].argmax;
    o.final_label = o.local_label;
    o.route = Route::local;
  }
  for (std::size_t j = 0; j < routed.size(); ++j) {
    auto& o = out[routed[j]];
    o.route = Route::llm;
    const LlmVerdict& v = *verdicts[j];
    o.llm_verdict = v;
    if (v.parsed()) {
      o.final_label = *v.parsed_label;
    } else if (policy == UnparsedPolicy::error) {
      const std::size_t completed = routed[j];  // documents before this one
      throw RoutingError(fmt::format("document '{}' got no parseable label ({}); {} of {} documents completed",
                                     o.document_id, v.error.empty() ? "completion: " + v.raw_completion : v.error,
                                     completed, out.size()),
                         completed);
    }
  }
  return out;
}

std::vector<std::size_t> routed_positions(std::span<const ProbabilityVector> probs, double threshold) {
  std::vector<std::size_t> routed;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (routes_to_llm(probs[i].confidence, threshold)) routed.push_back(i);
  }
  return routed;
}

RouteResult dispatch(std::span<const ProbabilityVector> probs, const Corpus& docs, const RouterConfig& config,
                     const CompletionBackend& backend, const std::vector<std::size_t>& routed) {
  RouteResult result;
  std::vector<const LlmVerdict*> verdict_ptrs;
  BatchResult batch;
  if (!routed.empty()) {
    std::vector<std::string> prompts, ids;
    prompts.reserve(routed.size());
    ids.reserve(routed.size());
    for (const auto i : routed) {
      prompts.push_back(render_prompt(config.prompt, docs.classes(), docs[i].text));
      ids.push_back(docs[i].id);
    }
    batch = classify_batch(backend, config.backend, prompts, docs.classes(), ids);
    result.llm_seconds = batch.wall_seconds;
    result.llm_calls = batch.calls;
    for (const auto& v : batch.verdicts) verdict_ptrs.push_back(&v);
  }
  result.outcomes = assemble(probs, docs, config.unparsed_policy, routed, verdict_ptrs);
  return result;
}

std::vector<ClassIndex> final_labels(std::span<const RoutingOutcome> outcomes) {
  std::vector<ClassIndex> out;
  out.reserve(outcomes.size());
  for (const auto& o : outcomes) out.push_back(o.final_label);
  return out;
}

}  // namespace

RouteResult route_probabilities(std::span<const ProbabilityVector> probs, const Corpus& docs,
                                const RouterConfig& config, const CompletionBackend& backend) {
  config.validate();
  if (probs.size() != docs.size()) {
    throw InputError(fmt::format("{} probability vectors for {} documents", probs.size(), docs.size()));
  }
  return dispatch(probs, docs, config, backend, routed_positions(probs, config.threshold));
}

RouteResult route_all_to_llm(std::span<const ProbabilityVector> probs, const Corpus& docs, const RouterConfig& config,
                             const CompletionBackend& backend) {
  config.validate();
  if (probs.size() != docs.size()) {
    throw InputError(fmt::format("{} probability vectors for {} documents", probs.size(), docs.size()));
  }
  std::vector<std::size_t> all(docs.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return dispatch(probs, docs, config, backend, all);
}

RouteResult route(const CalibratedModel& model, const EmbeddingMatrix& embeddings, const Corpus& docs,
                  const RouterConfig& config, const CompletionBackend& backend) {
  check_alignment(embeddings, docs);
  if (model.classes() != docs.class_count()) {
    throw InputError(fmt::format("model has {} classes, corpus has {}", model.classes(), docs.class_count()));
  }
  const auto start = std::chrono::steady_clock::now();
  const auto probs = predict_proba(model, embeddings);
  const double predict_seconds = seconds_since(start);
  auto result = route_probabilities(probs, docs, config, backend);
  result.prediction_seconds = predict_seconds;
  return result;
}

std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  for (int step = 10; step <= 19; ++step) grid.push_back(step * 0.05);
  grid.push_back(0.99);
  return grid;
}

void validate_grid(std::span<const double> grid) {
  if (grid.empty()) throw InputError("threshold grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] <= 1.0)) throw InputError(fmt::format("grid value {} outside (0, 1]", grid[i]));
    if (i > 0 && !(grid[i] > grid[i - 1])) throw InputError("threshold grid must be strictly increasing");
  }
}

TuningResult tune_threshold(const CalibratedModel& model, const EmbeddingMatrix& embeddings, const Corpus& validation,
                            std::span<const double> grid, const RouterConfig& config,
                            const CompletionBackend& backend) {
  validate_grid(grid);
  if (validation.size() == 0) throw InputError("empty validation set");
  check_alignment(embeddings, validation);
  const auto labels = validation.labels();

  TuningResult result;
  const auto start = std::chrono::steady_clock::now();
  const auto probs = predict_proba(model, embeddings);
  result.prediction_seconds = seconds_since(start);

  // Routed sets are nested in the threshold, so the largest one covers all.
  const auto widest = routed_positions(probs, grid.back());
  std::vector<LlmVerdict> verdicts;
  if (!widest.empty()) {
    std::vector<std::string> prompts, ids;
    for (const auto i : widest) {
      prompts.push_back(render_prompt(config.prompt, validation.classes(), validation[i].text));
      ids.push_back(validation[i].id);
    }
    auto batch = classify_batch(backend, config.backend, prompts, validation.classes(), ids);
    result.llm_seconds = batch.wall_seconds;
    result.llm_calls = batch.calls;
    verdicts = std::move(batch.verdicts);
  }
  std::vector<const LlmVerdict*> by_position(validation.size(), nullptr);
  for (std::size_t j = 0; j < widest.size(); ++j) by_position[widest[j]] = &verdicts[j];

  double best_f1 = -1.0;
  for (const double t : grid) {
    const auto routed = routed_positions(probs, t);
    std::vector<const LlmVerdict*> ptrs;
    ptrs.reserve(routed.size());
    for (const auto i : routed) ptrs.push_back(by_position[i]);
    const auto outcomes = assemble(probs, validation, config.unparsed_policy, routed, ptrs);
    const double f1 = macro_f1(labels, final_labels(outcomes), validation.class_count());
    result.table.push_back({t, f1, routed.size()});
    if (f1 > best_f1) {  // strict: ties keep the smaller threshold
      best_f1 = f1;
      result.best_threshold = t;
    }
  }
  return result;
}

std::vector<SweepPoint> sweep(const CalibratedModel& model, const EmbeddingMatrix& embeddings, const Corpus& test,
                              const RouterConfig& config, std::span<const double> grid,
                              const CompletionBackend& backend, double base_seconds, const PhaseClock* clock) {
  validate_grid(grid);
  const auto labels = test.labels();
  std::vector<SweepPoint> points;
  points.reserve(grid.size());
  for (const double t : grid) {
    RouterConfig cfg = config;
    cfg.threshold = t;
    const auto r = route(model, embeddings, test, cfg, backend);
    SweepPoint p;
    p.threshold = t;
    p.macro_f1 = macro_f1(labels, final_labels(r.outcomes), test.class_count());
    for (const auto& o : r.outcomes) p.instances_sent += o.route == Route::llm ? 1 : 0;
    p.pct_sent = test.size() ? 100.0 * static_cast<double>(p.instances_sent) / static_cast<double>(test.size()) : 0.0;
    double routed_seconds = r.prediction_seconds + r.llm_seconds;
    if (clock) {
      routed_seconds = clock->charge(r.prediction_seconds, Work{.predictions = static_cast<double>(test.size())}) +
                       clock->charge(r.llm_seconds, Work{.llm_calls = static_cast<double>(r.llm_calls)});
    }
    p.total_time_s = base_seconds + routed_seconds;
    points.push_back(p);
  }
  return points;
}

RoutedSubsetReport audit(std::span<const RoutingOutcome> outcomes, std::span<const ClassIndex> labels,
                         std::size_t classes) {
  if (outcomes.size() != labels.size()) {
    throw InputError(fmt::format("audit: {} outcomes vs {} labels", outcomes.size(), labels.size()));
  }
  RoutedSubsetReport rep;
  rep.total = outcomes.size();
  std::vector<ClassIndex> routed_true, routed_pred, local_true, local_pred, all_pred;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    all_pred.push_back(outcomes[i].final_label);
    if (outcomes[i].route == Route::llm) {
      routed_true.push_back(labels[i]);
      routed_pred.push_back(outcomes[i].final_label);
    } else {
      local_true.push_back(labels[i]);
      local_pred.push_back(outcomes[i].final_label);
    }
  }
  rep.routed = routed_true.size();
  rep.pct_routed = rep.total ? 100.0 * static_cast<double>(rep.routed) / static_cast<double>(rep.total) : 0.0;
  if (!routed_true.empty()) rep.routed_macro_f1 = macro_f1(routed_true, routed_pred, classes);
  if (!local_true.empty()) rep.local_macro_f1 = macro_f1(local_true, local_pred, classes);
  if (!outcomes.empty()) rep.overall_macro_f1 = macro_f1(labels, all_pred, classes);
  return rep;
}

std::string outcomes_jsonl(std::span<const RoutingOutcome> outcomes, const std::vector<std::string>& classes) {
  std::string out;
  for (const auto& o : outcomes) {
    json j;
    j["id"] = o.document_id;
    j["confidence"] = o.confidence;
    j["route"] = to_string(o.route);
    j["local_label"] = classes.at(o.local_label);
    if (o.llm_verdict && o.llm_verdict->parsed()) {
      j["llm_label"] = classes.at(*o.llm_verdict->parsed_label);
    } else {
      j["llm_label"] = nullptr;
    }
    j["final_label"] = classes.at(o.final_label);
    j["latency"] = o.llm_verdict ? o.llm_verdict->latency_seconds : 0.0;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_outcomes_jsonl(std::span<const RoutingOutcome> outcomes, const std::vector<std::string>& classes,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  out << outcomes_jsonl(outcomes, classes);
}

std::string sweep_csv(std::span<const SweepPoint> points) {
  std::string out = "threshold,macro_f1,instances_sent,pct,total_time_s\n";
  for (const auto& p : points) {
    out += fmt::format("{:.4f},{:.6f},{},{:.4f},{:.6f}\n", p.threshold, p.macro_f1, p.instances_sent, p.pct_sent,
                       p.total_time_s);
  }
  return out;
}

}  // namespace cascade
