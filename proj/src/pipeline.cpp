#include "cascade/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unordered_map>

#include "cascade/checksum.hpp"
#include "cascade/errors.hpp"
#include "cascade/metrics.hpp"
#include "cascade/report.hpp"

namespace cascade {

namespace fs = std::filesystem;
using nlohmann::json;

Workspace open_workspace(const RunManifest& manifest) {
  manifest.validate();
  LoadOptions opts;
  if (manifest.classes) opts.classes_path = *manifest.classes;
  auto corpus = load_corpus(manifest.dataset, format_from_path(manifest.dataset), opts);
  if (!corpus.fully_labeled()) throw InputError("evaluation corpus must be fully labeled");
  auto raw = read_embeddings(manifest.embeddings);
  auto embeddings = align(raw, corpus.ids());
  auto plan = stratified_folds(corpus, manifest.folds, manifest.seed);
  return Workspace{manifest, std::move(corpus), std::move(embeddings), std::move(plan)};
}

namespace {

EmbeddingMatrix rows_for(const EmbeddingMatrix& all, const Corpus& corpus, const std::vector<std::size_t>& positions) {
  std::vector<std::string> ids;
  ids.reserve(positions.size());
  for (const auto p : positions) ids.push_back(corpus[p].id);
  return align(all, ids);
}

std::vector<ClassIndex> finals(const std::vector<RoutingOutcome>& outcomes) {
  std::vector<ClassIndex> out;
  out.reserve(outcomes.size());
  for (const auto& o : outcomes) out.push_back(o.final_label);
  return out;
}

RouterConfig router_config(const RunManifest& m, double threshold) {
  RouterConfig cfg;
  cfg.threshold = threshold;
  cfg.unparsed_policy = m.unparsed_policy;
  cfg.prompt = m.prompt;
  cfg.backend = m.backend;
  return cfg;
}

// Simulated runs replace measured verdict latencies so outcome files are reproducible.
void normalize_latencies(std::vector<RoutingOutcome>& outcomes, const RunManifest& m) {
  if (m.timing != TimingMode::simulated) return;
  for (auto& o : outcomes) {
    if (o.llm_verdict) o.llm_verdict->latency_seconds = o.llm_verdict->attempts * m.rates.seconds_per_llm_call;
  }
}

/// Per-fold training plus the timing of the two phases every method shares.
struct TrainedFold {
  Split split;
  Corpus train_docs, validation_docs, test_docs;
  EmbeddingMatrix train_x, validation_x, test_x;
  CalibratedModel model;
  double representation_seconds;
  double training_seconds;
};

TrainedFold train_fold(const Workspace& ws, std::uint32_t fold, const PhaseClock& clock) {
  auto sp = split(ws.corpus, ws.plan, fold, ws.manifest.validation_fraction);
  std::optional<EmbeddingMatrix> tx, vx, sx;
  const double rep = clock.run([&] {
    tx = rows_for(ws.embeddings, ws.corpus, sp.train);
    vx = rows_for(ws.embeddings, ws.corpus, sp.validation);
    sx = rows_for(ws.embeddings, ws.corpus, sp.test);
    return Work{.documents_embedded = static_cast<double>(ws.corpus.size())};
  });
  auto train_docs = ws.corpus.subset(sp.train);
  const auto y = train_docs.labels();
  std::optional<CalibratedModel> model;
  const double train_s = clock.run([&] {
    try {
      model = train(*tx, y, ws.corpus.class_count(), ws.manifest.classifier);
    } catch (const InputError& e) {
      throw InputError(fmt::format("fold {}: {}", fold, e.what()));
    }
    return Work{.training_row_iterations =
                    static_cast<double>(y.size()) * static_cast<double>(std::max<std::uint32_t>(model->meta().iterations, 1))};
  });
  if (!model->meta().converged) {
    fmt::print(stderr, "warning: fold {}: classifier stopped after {} iterations (|grad|inf={:.3g})\n", fold,
               model->meta().iterations, model->meta().final_grad_inf);
  }
  return TrainedFold{sp,
                     std::move(train_docs),
                     ws.corpus.subset(sp.validation),
                     ws.corpus.subset(sp.test),
                     std::move(*tx),
                     std::move(*vx),
                     std::move(*sx),
                     std::move(*model),
                     rep,
                     train_s};
}

std::string fold_model_name(std::uint32_t fold) { return fmt::format("fold{}.cglr", fold); }

std::unique_ptr<CompletionBackend> oracle_backend(const Corpus& docs, const PromptTemplate& prompt) {
  auto answers = std::make_shared<std::unordered_map<std::string, std::string>>();
  for (const auto& d : docs.documents()) {
    answers->emplace(render_prompt(prompt, docs.classes(), d.text), " " + docs.classes()[*d.label] + ".");
  }
  return std::make_unique<MockBackend>([answers](const std::string& p) -> std::string {
    const auto it = answers->find(p);
    if (it == answers->end()) throw BackendError("oracle has no answer for this prompt", false);
    return it->second;
  });
}

}  // namespace

std::vector<CalibratedModel> cmd_train(const RunManifest& manifest) {
  const auto ws = open_workspace(manifest);
  const PhaseClock clock(manifest.timing, manifest.rates);
  const auto dir = manifest.output_dir / "models";
  fs::create_directories(dir);
  std::vector<CalibratedModel> models;
  std::string timings = "fold,phase,seconds\n";
  for (std::uint32_t f = 0; f < ws.plan.k; ++f) {
    auto tf = train_fold(ws, f, clock);
    save_model(tf.model, dir / fold_model_name(f));
    timings += fmt::format("{},{},{:.6f}\n{},{},{:.6f}\n", f, to_string(Phase::representation),
                           tf.representation_seconds, f, to_string(Phase::classifier_training), tf.training_seconds);
    models.push_back(std::move(tf.model));
  }
  write_text_file(manifest.output_dir / "train_timings.csv", timings);
  write_text_file(manifest.output_dir / "manifest.json", manifest_to_json(manifest));
  return models;
}

EvaluationResults evaluate(const Workspace& ws, const CompletionBackend& backend,
                           const CompletionBackend* tuning_backend) {
  const auto& m = ws.manifest;
  const PhaseClock clock(m.timing, m.rates);
  EvaluationResults res;
  res.dataset_name = m.dataset_name;
  res.classes = ws.corpus.classes();
  res.folds = ws.plan.k;
  res.methods = m.methods;
  res.timing = m.timing;
  for (const auto meth : m.methods) res.ledgers[meth];

  auto uses = [&](Method meth) { return std::find(m.methods.begin(), m.methods.end(), meth) != m.methods.end(); };

  std::unique_ptr<CompletionBackend> owned_tuning;
  if (!tuning_backend && uses(Method::cascade) && !m.threshold) {
    switch (m.tuning_source) {
      case TuningSource::automatic:
        if (m.backend.kind == BackendKind::http) {
          throw InputError("threshold tuning against a live http backend must be requested explicitly "
                           "(tuning.source = backend, cassette or oracle)");
        }
        tuning_backend = &backend;
        break;
      case TuningSource::backend: tuning_backend = &backend; break;
      case TuningSource::cassette:
        owned_tuning = std::make_unique<ReplayBackend>(ReplayBackend::from_file(*m.tuning_cassette));
        tuning_backend = owned_tuning.get();
        break;
      case TuningSource::oracle: break;  // built per fold from validation labels
    }
  }

  for (std::uint32_t f = 0; f < ws.plan.k; ++f) {
    auto tf = train_fold(ws, f, clock);
    FoldResult fr;
    fr.fold = f;
    fr.train_size = tf.split.train.size();
    fr.validation_size = tf.split.validation.size();
    fr.test_size = tf.split.test.size();
    fr.training = tf.model.meta();
    const auto y_test = tf.test_docs.labels();

    std::vector<ProbabilityVector> probs;
    const double predict_s = clock.run([&] {
      probs = predict_proba(tf.model, tf.test_x);
      return Work{.predictions = static_cast<double>(probs.size())};
    });
    fr.ece = expected_calibration_error(probs, y_test, 10);

    for (const auto meth : m.methods) {
      auto& ledger = res.ledgers[meth];
      ledger.record(Phase::representation, f, tf.representation_seconds);
      ledger.record(Phase::classifier_training, f, tf.training_seconds);
      ledger.record(Phase::prediction, f, predict_s);
    }

    if (uses(Method::local)) {
      std::vector<ClassIndex> pred;
      for (const auto& p : probs) pred.push_back(p.argmax);
      fr.macro_f1[Method::local] = macro_f1(y_test, pred, ws.corpus.class_count());
    }

    if (uses(Method::cascade)) {
      double tuning_s = 0.0;
      if (m.threshold) {
        fr.threshold = *m.threshold;
      } else {
        std::unique_ptr<CompletionBackend> fold_oracle;
        const CompletionBackend* tb = tuning_backend;
        if (!tb) {
          fold_oracle = oracle_backend(tf.validation_docs, m.prompt);
          tb = fold_oracle.get();
        }
        const auto tuning = tune_threshold(tf.model, tf.validation_x, tf.validation_docs, m.grid,
                                           router_config(m, m.grid.back()), *tb);
        tuning_s = clock.charge(tuning.prediction_seconds,
                                Work{.predictions = static_cast<double>(tf.validation_docs.size())}) +
                   clock.charge(tuning.llm_seconds, Work{.llm_calls = static_cast<double>(tuning.llm_calls)});
        fr.threshold = tuning.best_threshold;
        fr.tuned = true;
        fr.tuning = tuning.table;
      }
      auto routed = route_probabilities(probs, tf.test_docs, router_config(m, fr.threshold), backend);
      normalize_latencies(routed.outcomes, m);
      auto& ledger = res.ledgers[Method::cascade];
      ledger.record(Phase::threshold_tuning, f, tuning_s);
      ledger.record(Phase::llm_prompting, f,
                    clock.charge(routed.llm_seconds, Work{.llm_calls = static_cast<double>(routed.llm_calls)}));
      fr.macro_f1[Method::cascade] = macro_f1(y_test, finals(routed.outcomes), ws.corpus.class_count());
      fr.audit = audit(routed.outcomes, y_test, ws.corpus.class_count());
      fr.cascade_outcomes = std::move(routed.outcomes);
    }

    if (uses(Method::llm)) {
      const auto all = route_all_to_llm(probs, tf.test_docs, router_config(m, 1.0), backend);
      res.ledgers[Method::llm].record(
          Phase::llm_prompting, f, clock.charge(all.llm_seconds, Work{.llm_calls = static_cast<double>(all.llm_calls)}));
      fr.macro_f1[Method::llm] = macro_f1(y_test, finals(all.outcomes), ws.corpus.class_count());
    }
    res.fold_results.push_back(std::move(fr));
  }
  return res;
}

EvaluationResults cmd_evaluate(const RunManifest& manifest) {
  const auto ws = open_workspace(manifest);
  const auto backend = make_backend(manifest.backend);
  auto results = evaluate(ws, *backend);

  const auto& dir = manifest.output_dir;
  fs::create_directories(dir / "outcomes");
  write_text_file(dir / "manifest.json", manifest_to_json(manifest));
  for (const auto& fr : results.fold_results) {
    if (!fr.cascade_outcomes.empty()) {
      write_outcomes_jsonl(fr.cascade_outcomes, results.classes, dir / "outcomes" / fmt::format("fold{}.jsonl", fr.fold));
    }
  }
  write_report_bundle(results, manifest.cost, dir);
  return results;
}

SweepSeries sweep_folds(const Workspace& ws, const CompletionBackend& backend) {
  const auto& m = ws.manifest;
  const PhaseClock clock(m.timing, m.rates);
  SweepSeries s;
  s.thresholds = m.grid;
  const auto g = m.grid.size();
  s.macro_f1.assign(g, 0.0);
  s.instances_sent.assign(g, 0.0);
  s.pct_sent.assign(g, 0.0);
  s.total_time_s.assign(g, 0.0);
  for (std::uint32_t f = 0; f < ws.plan.k; ++f) {
    const auto tf = train_fold(ws, f, clock);
    auto points = sweep(tf.model, tf.test_x, tf.test_docs, router_config(m, m.grid.back()), m.grid, backend,
                        tf.representation_seconds + tf.training_seconds, &clock);
    for (std::size_t i = 0; i < g; ++i) {
      s.macro_f1[i] += points[i].macro_f1;
      s.instances_sent[i] += static_cast<double>(points[i].instances_sent);
      s.pct_sent[i] += points[i].pct_sent;
      s.total_time_s[i] += points[i].total_time_s;
    }
    s.per_fold.push_back(std::move(points));
  }
  const auto k = static_cast<double>(ws.plan.k);
  for (std::size_t i = 0; i < g; ++i) {
    s.macro_f1[i] /= k;
    s.instances_sent[i] /= k;
    s.pct_sent[i] /= k;
    s.total_time_s[i] /= k;
  }
  return s;
}

SweepSeries cmd_sweep(const RunManifest& manifest) {
  const auto ws = open_workspace(manifest);
  const auto backend = make_backend(manifest.backend);
  auto s = sweep_folds(ws, *backend);

  std::string csv = "threshold,macro_f1,instances_sent,pct,total_time_s\n";
  std::string txt = fmt::format("Threshold sweep: {} ({} folds, {} timing)\n", manifest.dataset_name, ws.plan.k,
                                to_string(manifest.timing));
  txt += fmt::format("{:>9}  {:>9}  {:>14}  {:>7}  {:>13}\n", "threshold", "Macro-F1", "instances sent", "pct",
                     "total time s");
  for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
    csv += fmt::format("{:.4f},{:.6f},{:.2f},{:.4f},{:.6f}\n", s.thresholds[i], s.macro_f1[i], s.instances_sent[i],
                       s.pct_sent[i], s.total_time_s[i]);
    txt += fmt::format("{:>9.2f}  {:>9.1f}  {:>14.1f}  {:>6.1f}%  {:>13.2f}\n", s.thresholds[i],
                       100.0 * s.macro_f1[i], s.instances_sent[i], s.pct_sent[i], s.total_time_s[i]);
  }
  fs::create_directories(manifest.output_dir);
  write_text_file(manifest.output_dir / "sweep.csv", csv);
  write_text_file(manifest.output_dir / "sweep.txt", txt);
  write_text_file(manifest.output_dir / "manifest.json", manifest_to_json(manifest));
  return s;
}

void cmd_report(const fs::path& run_dir, const std::optional<CostModel>& cost_override) {
  std::ifstream in(run_dir / "results.json", std::ios::binary);
  if (!in) throw InputError(fmt::format("'{}' has no results.json; run evaluate first", run_dir.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto results = results_from_json(ss.str());
  CostModel cost;
  if (cost_override) {
    cost = *cost_override;
  } else if (fs::exists(run_dir / "manifest.json")) {
    cost = load_manifest(run_dir / "manifest.json").cost;
  }
  cost.validate();
  write_report_bundle(results, cost, run_dir);
}

RouteResult cmd_route(const fs::path& model_path, const Corpus& corpus, const EmbeddingMatrix& embeddings,
                      const RouterConfig& config, const fs::path& out_dir) {
  const auto model = load_model(model_path);
  const auto aligned = align(embeddings, corpus.ids());
  const auto backend = make_backend(config.backend);
  auto result = route(model, aligned, corpus, config, *backend);
  fs::create_directories(out_dir);
  write_outcomes_jsonl(result.outcomes, corpus.classes(), out_dir / "outcomes.jsonl");
  if (corpus.fully_labeled()) {
    const auto rep = audit(result.outcomes, corpus.labels(), corpus.class_count());
    auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{:.1f}", 100.0 * *v) : std::string("NA"); };
    write_text_file(out_dir / "audit.txt",
                    fmt::format("threshold {:.2f}\nsent to LLM: {} of {} ({:.1f}%)\nrouted Macro-F1: {}\n"
                                "local Macro-F1: {}\noverall Macro-F1: {:.1f}\n",
                                config.threshold, rep.routed, rep.total, rep.pct_routed, opt(rep.routed_macro_f1),
                                opt(rep.local_macro_f1), 100.0 * rep.overall_macro_f1));
  }
  return result;
}

CassetteSource cassette_source_from_string(std::string_view name) {
  if (name == "oracle") return CassetteSource::oracle;
  if (name == "adversarial") return CassetteSource::adversarial;
  if (name == "constant") return CassetteSource::constant;
  if (name == "backend") return CassetteSource::backend;
  throw InputError(fmt::format("unknown cassette source '{}' (oracle, adversarial, constant, backend)", name));
}

std::vector<CassetteEntry> export_cassette(const Corpus& corpus, const PromptTemplate& prompt, CassetteSource source,
                                           const std::string& constant_completion, const CompletionBackend* backend,
                                           const BackendConfig* backend_config) {
  std::vector<std::string> prompts;
  prompts.reserve(corpus.size());
  for (const auto& d : corpus.documents()) prompts.push_back(render_prompt(prompt, corpus.classes(), d.text));

  std::vector<std::string> completions(corpus.size());
  switch (source) {
    case CassetteSource::oracle:
    case CassetteSource::adversarial: {
      const auto labels = corpus.labels();
      const auto c = corpus.class_count();
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto label = source == CassetteSource::oracle ? labels[i] : static_cast<ClassIndex>((labels[i] + 1) % c);
        completions[i] = " " + corpus.classes()[label] + ".";
      }
      break;
    }
    case CassetteSource::constant: std::fill(completions.begin(), completions.end(), constant_completion); break;
    case CassetteSource::backend: {
      if (!backend || !backend_config) throw InputError("recording a cassette needs a backend");
      const auto batch = classify_batch(*backend, *backend_config, prompts, corpus.classes(), corpus.ids());
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (!batch.verdicts[i].error.empty()) {
          throw EvaluationError(fmt::format("recording '{}' failed: {}", corpus[i].id, batch.verdicts[i].error));
        }
        completions[i] = batch.verdicts[i].raw_completion;
      }
      break;
    }
  }

  std::vector<CassetteEntry> out;
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto key = sha256_hex(prompts[i]);
    if (const auto it = seen.find(key); it != seen.end()) {
      if (out[it->second].completion != completions[i]) {
        fmt::print(stderr, "warning: documents with identical text disagree; keeping the first answer for '{}'\n",
                   corpus[i].id);
      }
      continue;
    }
    seen.emplace(key, out.size());
    out.push_back(CassetteEntry{std::move(key), std::move(completions[i])});
  }
  return out;
}

namespace {

json timings_json(const CostLedger& ledger) {
  json arr = json::array();
  for (const auto& t : ledger.timings()) {
    arr.push_back({{"phase", to_string(t.phase)}, {"fold", t.fold}, {"seconds", t.seconds}});
  }
  return arr;
}

Phase phase_from_string(std::string_view s) {
  for (const auto p : kAllPhases) {
    if (to_string(p) == s) return p;
  }
  throw InputError(fmt::format("unknown phase '{}'", s));
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::optional<double> optional_from(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

}  // namespace

std::string results_to_json(const EvaluationResults& r) {
  json j;
  j["dataset_name"] = r.dataset_name;
  j["classes"] = r.classes;
  j["folds"] = r.folds;
  j["timing"] = to_string(r.timing);
  json methods = json::array();
  for (const auto m : r.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  json folds = json::array();
  for (const auto& fr : r.fold_results) {
    json f;
    f["fold"] = fr.fold;
    f["train_size"] = fr.train_size;
    f["validation_size"] = fr.validation_size;
    f["test_size"] = fr.test_size;
    f["threshold"] = fr.threshold;
    f["tuned"] = fr.tuned;
    json tuning = json::array();
    for (const auto& row : fr.tuning) {
      tuning.push_back({{"threshold", row.threshold}, {"macro_f1", row.macro_f1}, {"routed", row.routed}});
    }
    f["tuning"] = tuning;
    json f1 = json::object();
    for (const auto& [m, v] : fr.macro_f1) f1[std::string(to_string(m))] = v;
    f["macro_f1"] = f1;
    f["audit"] = {{"routed", fr.audit.routed},
                  {"total", fr.audit.total},
                  {"pct_routed", fr.audit.pct_routed},
                  {"routed_macro_f1", optional_json(fr.audit.routed_macro_f1)},
                  {"local_macro_f1", optional_json(fr.audit.local_macro_f1)},
                  {"overall_macro_f1", fr.audit.overall_macro_f1}};
    f["training"] = {{"iterations", fr.training.iterations},
                     {"final_objective", fr.training.final_objective},
                     {"lambda", fr.training.lambda},
                     {"final_grad_inf", fr.training.final_grad_inf},
                     {"converged", fr.training.converged}};
    f["ece"] = fr.ece;
    folds.push_back(f);
  }
  j["fold_results"] = folds;
  json ledgers = json::object();
  for (const auto& [m, ledger] : r.ledgers) ledgers[std::string(to_string(m))] = timings_json(ledger);
  j["ledgers"] = ledgers;
  return j.dump(2) + "\n";
}

EvaluationResults results_from_json(const std::string& text) {
  EvaluationResults r;
  try {
    const auto j = json::parse(text);
    r.dataset_name = j.at("dataset_name").get<std::string>();
    r.classes = j.at("classes").get<std::vector<std::string>>();
    r.folds = j.at("folds").get<std::uint32_t>();
    r.timing = timing_mode_from_string(j.at("timing").get<std::string>());
    for (const auto& m : j.at("methods")) r.methods.push_back(method_from_string(m.get<std::string>()));
    for (const auto& f : j.at("fold_results")) {
      FoldResult fr;
      fr.fold = f.at("fold").get<std::uint32_t>();
      fr.train_size = f.at("train_size").get<std::size_t>();
      fr.validation_size = f.at("validation_size").get<std::size_t>();
      fr.test_size = f.at("test_size").get<std::size_t>();
      fr.threshold = f.at("threshold").get<double>();
      fr.tuned = f.at("tuned").get<bool>();
      for (const auto& row : f.at("tuning")) {
        fr.tuning.push_back({row.at("threshold").get<double>(), row.at("macro_f1").get<double>(),
                             row.at("routed").get<std::size_t>()});
      }
      for (const auto& [name, v] : f.at("macro_f1").items()) fr.macro_f1[method_from_string(name)] = v.get<double>();
      const auto& a = f.at("audit");
      fr.audit.routed = a.at("routed").get<std::size_t>();
      fr.audit.total = a.at("total").get<std::size_t>();
      fr.audit.pct_routed = a.at("pct_routed").get<double>();
      fr.audit.routed_macro_f1 = optional_from(a.at("routed_macro_f1"));
      fr.audit.local_macro_f1 = optional_from(a.at("local_macro_f1"));
      fr.audit.overall_macro_f1 = a.at("overall_macro_f1").get<double>();
      const auto& t = f.at("training");
      fr.training.iterations = t.at("iterations").get<std::uint32_t>();
      fr.training.final_objective = t.at("final_objective").get<double>();
      fr.training.lambda = t.at("lambda").get<double>();
      fr.training.final_grad_inf = t.at("final_grad_inf").get<double>();
      fr.training.converged = t.at("converged").get<bool>();
      fr.ece = f.at("ece").get<double>();
      r.fold_results.push_back(std::move(fr));
    }
    for (const auto& [name, arr] : j.at("ledgers").items()) {
      auto& ledger = r.ledgers[method_from_string(name)];
      for (const auto& t : arr) {
        ledger.record(phase_from_string(t.at("phase").get<std::string>()), t.at("fold").get<std::uint32_t>(),
                      t.at("seconds").get<double>());
      }
    }
  } catch (const json::exception& e) {
    throw InputError(fmt::format("malformed results.json: {}", e.what()));
  }
  return r;
}

}  // namespace cascade
