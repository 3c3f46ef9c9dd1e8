#include "cascade/manifest.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "cascade/errors.hpp"

namespace cascade {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(TuningSource s) {
  switch (s) {
    case TuningSource::automatic: return "auto";
    case TuningSource::backend: return "backend";
    case TuningSource::cassette: return "cassette";
    case TuningSource::oracle: return "oracle";
  }
  return "?";
}

TuningSource tuning_source_from_string(std::string_view name) {
  if (name == "auto") return TuningSource::automatic;
  if (name == "backend") return TuningSource::backend;
  if (name == "cassette") return TuningSource::cassette;
  if (name == "oracle") return TuningSource::oracle;
  throw InputError(fmt::format("unknown tuning source '{}' (expected auto, backend, cassette or oracle)", name));
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::local: return "local";
    case Method::cascade: return "cascade";
    case Method::llm: return "llm";
  }
  return "?";
}

Method method_from_string(std::string_view name) {
  if (name == "local") return Method::local;
  if (name == "cascade") return Method::cascade;
  if (name == "llm") return Method::llm;
  throw InputError(fmt::format("unknown method '{}' (expected local, cascade or llm)", name));
}

void RunManifest::validate() const {
  if (dataset.empty()) throw InputError("manifest: 'dataset' is required");
  if (embeddings.empty()) throw InputError("manifest: 'embeddings' is required");
  if (folds < 2) throw InputError("manifest: 'folds' must be >= 2");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw InputError("manifest: 'validation_fraction' must lie in (0, 1)");
  }
  if (threshold && !(*threshold > 0.0 && *threshold <= 1.0)) {
    throw InputError("manifest: 'threshold' must lie in (0, 1]");
  }
  validate_grid(grid);
  if (methods.empty()) throw InputError("manifest: 'methods' is empty");
  if (tuning_source == TuningSource::cassette && !tuning_cassette) {
    throw InputError("manifest: tuning source 'cassette' needs 'tuning.cassette'");
  }
  backend.validate();
  cost.validate();
}

namespace {

class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw InputError(fmt::format("manifest: '{}' must be an object", name_));
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_[key].is_null()) return;
    try {
      out = j_[key].get<T>();
    } catch (const json::exception& e) {
      throw InputError(fmt::format("manifest: '{}{}': {}", prefix(), key, e.what()));
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_[key].is_null()) return nullptr;
    return &j_[key];
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw InputError(fmt::format("manifest: unknown key '{}{}'", prefix(), key));
    }
  }

 private:
  std::string prefix() const { return name_.empty() ? "" : name_ + "."; }
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) path = base / path;
  return path.lexically_normal();
}

}  // namespace

namespace {

RunManifest parse_root(const std::string& json_text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InputError(fmt::format("manifest: malformed JSON ({})", e.what()));
  }
  RunManifest m;
  Section top(root, "");
  std::string s;

  top.get("dataset_name", m.dataset_name);
  s.clear();
  top.get("dataset", s);
  if (!s.empty()) m.dataset = resolve(base_dir, s);
  s.clear();
  top.get("classes", s);
  if (!s.empty()) m.classes = resolve(base_dir, s);
  s.clear();
  top.get("embeddings", s);
  if (!s.empty()) m.embeddings = resolve(base_dir, s);
  top.get("folds", m.folds);
  top.get("seed", m.seed);
  top.get("validation_fraction", m.validation_fraction);
  double threshold = 0.0;
  if (top.child("threshold")) {
    top.get("threshold", threshold);
    m.threshold = threshold;
  }
  top.get("grid", m.grid);
  if (const auto* methods = top.child("methods")) {
    if (!methods->is_array()) throw InputError("manifest: 'methods' must be an array");
    m.methods.clear();
    for (const auto& v : *methods) m.methods.push_back(method_from_string(v.get<std::string>()));
  }
  s.clear();
  top.get("unparsed_policy", s);
  if (!s.empty()) m.unparsed_policy = unparsed_policy_from_string(s);
  s.clear();
  top.get("output_dir", s);
  if (!s.empty()) m.output_dir = resolve(base_dir, s);

  if (const auto* c = top.child("classifier")) {
    Section sec(*c, "classifier");
    sec.get("lambda", m.classifier.lambda);
    sec.get("tol", m.classifier.tol);
    sec.get("max_iter", m.classifier.max_iter);
    sec.finish();
  }
  if (const auto* b = top.child("backend")) {
    Section sec(*b, "backend");
    s.clear();
    sec.get("kind", s);
    if (!s.empty()) m.backend.kind = backend_kind_from_string(s);
    sec.get("endpoint", m.backend.endpoint);
    sec.get("model", m.backend.model);
    sec.get("response_path", m.backend.response_path);
    sec.get("max_tokens", m.backend.max_tokens);
    sec.get("temperature", m.backend.temperature);
    std::int64_t ms = m.backend.timeout.count();
    sec.get("timeout_ms", ms);
    m.backend.timeout = std::chrono::milliseconds(ms);
    sec.get("max_retries", m.backend.max_retries);
    sec.get("max_concurrent", m.backend.max_concurrent);
    ms = m.backend.retry_backoff.count();
    sec.get("retry_backoff_ms", ms);
    m.backend.retry_backoff = std::chrono::milliseconds(ms);
    s.clear();
    sec.get("cassette", s);
    if (!s.empty()) m.backend.cassette = resolve(base_dir, s);
    sec.get("mock_completion", m.backend.mock_completion);
    sec.finish();
  }
  if (const auto* p = top.child("prompt")) {
    Section sec(*p, "prompt");
    sec.get("instruction", m.prompt.instruction);
    if (const auto* ex = sec.child("exemplars")) {
      if (!ex->is_array()) throw InputError("manifest: 'prompt.exemplars' must be an array");
      m.prompt.exemplars.clear();
      for (const auto& e : *ex) {
        if (!e.is_object() || !e.contains("text") || !e.contains("class")) {
          throw InputError("manifest: each exemplar needs 'text' and 'class'");
        }
        m.prompt.exemplars.emplace_back(e["text"].get<std::string>(), e["class"].get<std::string>());
      }
    }
    sec.get("input_tag", m.prompt.input_tag);
    sec.get("output_tag", m.prompt.output_tag);
    sec.finish();
  }
  if (const auto* t = top.child("tuning")) {
    Section sec(*t, "tuning");
    s.clear();
    sec.get("source", s);
    if (!s.empty()) m.tuning_source = tuning_source_from_string(s);
    s.clear();
    sec.get("cassette", s);
    if (!s.empty()) m.tuning_cassette = resolve(base_dir, s);
    sec.finish();
  }
  if (const auto* t = top.child("timing")) {
    Section sec(*t, "timing");
    s.clear();
    sec.get("mode", s);
    if (!s.empty()) m.timing = timing_mode_from_string(s);
    if (const auto* r = sec.child("rates")) {
      Section rates(*r, "timing.rates");
      rates.get("seconds_per_document_embedded", m.rates.seconds_per_document_embedded);
      rates.get("seconds_per_training_row_iteration", m.rates.seconds_per_training_row_iteration);
      rates.get("seconds_per_prediction", m.rates.seconds_per_prediction);
      rates.get("seconds_per_llm_call", m.rates.seconds_per_llm_call);
      rates.finish();
    }
    sec.finish();
  }
  if (const auto* c = top.child("cost_model")) {
    Section sec(*c, "cost_model");
    sec.get("gpu_power_kw", m.cost.gpu_power_kw);
    sec.get("carbon_intensity", m.cost.carbon_intensity);
    sec.get("pue", m.cost.pue);
    sec.get("dollars_per_hour", m.cost.dollars_per_hour);
    sec.get("folds", m.cost.folds);
    sec.finish();
  }
  top.finish();
  return m;
}

}  // namespace

RunManifest parse_manifest(const std::string& json_text, const fs::path& base_dir) {
  try {
    return parse_root(json_text, base_dir);
  } catch (const json::exception& e) {
    throw InputError(fmt::format("manifest: {}", e.what()));
  }
}

RunManifest load_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open manifest '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), fs::absolute(path).parent_path());
}

std::string manifest_to_json(const RunManifest& m) {
  json j;
  j["dataset_name"] = m.dataset_name;
  j["dataset"] = m.dataset.string();
  if (m.classes) j["classes"] = m.classes->string();
  j["embeddings"] = m.embeddings.string();
  j["folds"] = m.folds;
  j["seed"] = m.seed;
  j["validation_fraction"] = m.validation_fraction;
  if (m.threshold) j["threshold"] = *m.threshold;
  j["grid"] = m.grid;
  json methods = json::array();
  for (const auto meth : m.methods) methods.push_back(to_string(meth));
  j["methods"] = methods;
  j["unparsed_policy"] = to_string(m.unparsed_policy);
  j["classifier"] = {{"lambda", m.classifier.lambda}, {"tol", m.classifier.tol}, {"max_iter", m.classifier.max_iter}};
  json b{{"kind", to_string(m.backend.kind)},
         {"response_path", m.backend.response_path},
         {"max_tokens", m.backend.max_tokens},
         {"temperature", m.backend.temperature},
         {"timeout_ms", m.backend.timeout.count()},
         {"max_retries", m.backend.max_retries},
         {"max_concurrent", m.backend.max_concurrent},
         {"retry_backoff_ms", m.backend.retry_backoff.count()}};
  if (!m.backend.endpoint.empty()) b["endpoint"] = m.backend.endpoint;
  if (!m.backend.model.empty()) b["model"] = m.backend.model;
  if (!m.backend.cassette.empty()) b["cassette"] = m.backend.cassette.string();
  if (m.backend.kind == BackendKind::mock) b["mock_completion"] = m.backend.mock_completion;
  j["backend"] = b;
  json ex = json::array();
  for (const auto& [text, cls] : m.prompt.exemplars) ex.push_back({{"text", text}, {"class", cls}});
  j["prompt"] = {{"instruction", m.prompt.instruction},
                 {"exemplars", ex},
                 {"input_tag", m.prompt.input_tag},
                 {"output_tag", m.prompt.output_tag}};
  json tuning{{"source", to_string(m.tuning_source)}};
  if (m.tuning_cassette) tuning["cassette"] = m.tuning_cassette->string();
  j["tuning"] = tuning;
  j["timing"] = {{"mode", to_string(m.timing)},
                 {"rates",
                  {{"seconds_per_document_embedded", m.rates.seconds_per_document_embedded},
                   {"seconds_per_training_row_iteration", m.rates.seconds_per_training_row_iteration},
                   {"seconds_per_prediction", m.rates.seconds_per_prediction},
                   {"seconds_per_llm_call", m.rates.seconds_per_llm_call}}}};
  j["cost_model"] = {{"gpu_power_kw", m.cost.gpu_power_kw},
                     {"carbon_intensity", m.cost.carbon_intensity},
                     {"pue", m.cost.pue},
                     {"dollars_per_hour", m.cost.dollars_per_hour},
                     {"folds", m.cost.folds}};
  return j.dump(2) + "\n";
}

void apply_environment(RunManifest& manifest) {
  if (const char* endpoint = std::getenv(kEndpointEnvVar); endpoint && *endpoint) {
    manifest.backend.endpoint = endpoint;
  }
}

}  // namespace cascade
