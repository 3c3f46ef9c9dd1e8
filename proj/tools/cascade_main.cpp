// cascade: train, evaluate and inspect a confidence-gated classifier/LLM cascade.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <cstdio>
#include <optional>

#include "cascade/errors.hpp"
#include "cascade/pipeline.hpp"
#include "cascade/report.hpp"

namespace fs = std::filesystem;
using namespace cascade;

namespace {

/// Command-line values that take precedence over the manifest.
struct Overrides {
  std::optional<fs::path> manifest;
  std::optional<std::string> name;
  std::optional<fs::path> dataset, classes, embeddings, output, cassette, tuning_cassette;
  std::optional<std::uint32_t> folds;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  std::optional<std::string> backend, endpoint, model, timing, tuning, policy, mock_completion;
  std::optional<std::uint32_t> max_concurrent, max_retries;
  std::vector<std::string> methods;
};

void add_run_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-m,--manifest", o.manifest, "Run manifest (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--name", o.name, "Dataset name used in reports");
  cmd->add_option("--dataset", o.dataset, "Labeled corpus (.jsonl or .csv)");
  cmd->add_option("--classes", o.classes, "classes.json with the class order");
  cmd->add_option("--embeddings", o.embeddings, "CGEM embedding file");
  cmd->add_option("-o,--output", o.output, "Output directory");
  cmd->add_option("--folds", o.folds, "Number of folds");
  cmd->add_option("--seed", o.seed, "Fold and split seed");
  cmd->add_option("--threshold", o.threshold, "Fixed confidence threshold (skips tuning)");
  cmd->add_option("--backend", o.backend, "LLM backend: mock, replay, http");
  cmd->add_option("--cassette", o.cassette, "Replay cassette (JSONL)");
  cmd->add_option("--endpoint", o.endpoint, "HTTP completion endpoint");
  cmd->add_option("--model", o.model, "Model name sent to the HTTP endpoint");
  cmd->add_option("--mock-completion", o.mock_completion, "Constant answer of the mock backend");
  cmd->add_option("--max-concurrent", o.max_concurrent, "Requests in flight");
  cmd->add_option("--max-retries", o.max_retries, "Retries per request");
  cmd->add_option("--timing", o.timing, "measured or simulated");
  cmd->add_option("--tuning", o.tuning, "Threshold tuning source: auto, backend, cassette, oracle");
  cmd->add_option("--tuning-cassette", o.tuning_cassette, "Cassette used for threshold tuning");
  cmd->add_option("--unparsed", o.policy, "Unparsed LLM answers: fallback_local or error");
  cmd->add_option("--methods", o.methods, "Subset of local, cascade, llm");
}

RunManifest build_manifest(const Overrides& o) {
  RunManifest m = o.manifest ? load_manifest(*o.manifest) : RunManifest{};
  if (o.name) m.dataset_name = *o.name;
  if (o.dataset) m.dataset = *o.dataset;
  if (o.classes) m.classes = *o.classes;
  if (o.embeddings) m.embeddings = *o.embeddings;
  if (o.output) m.output_dir = *o.output;
  if (o.folds) m.folds = *o.folds;
  if (o.seed) m.seed = *o.seed;
  if (o.threshold) m.threshold = *o.threshold;
  if (o.backend) m.backend.kind = backend_kind_from_string(*o.backend);
  if (o.cassette) m.backend.cassette = *o.cassette;
  if (o.endpoint) m.backend.endpoint = *o.endpoint;
  if (o.model) m.backend.model = *o.model;
  if (o.mock_completion) m.backend.mock_completion = *o.mock_completion;
  if (o.max_concurrent) m.backend.max_concurrent = *o.max_concurrent;
  if (o.max_retries) m.backend.max_retries = *o.max_retries;
  if (o.timing) m.timing = timing_mode_from_string(*o.timing);
  if (o.tuning) m.tuning_source = tuning_source_from_string(*o.tuning);
  if (o.tuning_cassette) m.tuning_cassette = *o.tuning_cassette;
  if (o.policy) m.unparsed_policy = unparsed_policy_from_string(*o.policy);
  if (!o.methods.empty()) {
    m.methods.clear();
    for (const auto& s : o.methods) m.methods.push_back(method_from_string(s));
  }
  if (!o.endpoint) apply_environment(m);
  m.validate();
  return m;
}

Corpus load_input_corpus(const fs::path& path, const std::optional<fs::path>& classes) {
  LoadOptions opts;
  opts.classes_path = classes;
  return load_corpus(path, format_from_path(path), opts);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confidence-gated cascade of a calibrated classifier and an LLM"};
  app.require_subcommand(1);

  Overrides run;
  auto* train_cmd = app.add_subcommand("train", "Train one classifier per fold");
  add_run_options(train_cmd, run);
  auto* eval_cmd = app.add_subcommand("evaluate", "Cross-validated evaluation and report bundle");
  add_run_options(eval_cmd, run);
  auto* sweep_cmd = app.add_subcommand("sweep", "Macro-F1 and LLM usage over a threshold grid");
  add_run_options(sweep_cmd, run);

  fs::path run_dir;
  std::optional<double> dollars_per_hour, gpu_kw, carbon, pue;
  auto* report_cmd = app.add_subcommand("report", "Re-render the tables of an evaluated run");
  report_cmd->add_option("run_dir", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  report_cmd->add_option("--dollars-per-hour", dollars_per_hour, "GPU price");
  report_cmd->add_option("--gpu-kw", gpu_kw, "GPU power draw in kW");
  report_cmd->add_option("--carbon-intensity", carbon, "kg CO2 per kWh");
  report_cmd->add_option("--pue", pue, "Data-center PUE");

  fs::path model_path, corpus_path, emb_path, out_dir = "route";
  std::optional<fs::path> corpus_classes, route_cassette;
  double route_threshold = 0.95;
  std::string route_backend = "replay", route_endpoint, route_mock, route_policy = "fallback_local";
  auto* route_cmd = app.add_subcommand("route", "Route a corpus with a saved model");
  route_cmd->add_option("--model", model_path, "Model file (.cglr)")->required()->check(CLI::ExistingFile);
  route_cmd->add_option("--corpus", corpus_path, "Corpus (.jsonl or .csv)")->required()->check(CLI::ExistingFile);
  route_cmd->add_option("--classes", corpus_classes, "classes.json");
  route_cmd->add_option("--embeddings", emb_path, "CGEM embedding file")->required()->check(CLI::ExistingFile);
  route_cmd->add_option("--threshold", route_threshold, "Confidence threshold")->capture_default_str();
  route_cmd->add_option("--backend", route_backend, "mock, replay or http")->capture_default_str();
  route_cmd->add_option("--cassette", route_cassette, "Replay cassette");
  route_cmd->add_option("--endpoint", route_endpoint, "HTTP completion endpoint");
  route_cmd->add_option("--mock-completion", route_mock, "Constant mock answer");
  route_cmd->add_option("--unparsed", route_policy, "fallback_local or error")->capture_default_str();
  route_cmd->add_option("-o,--output", out_dir, "Output directory")->capture_default_str();

  fs::path cassette_out;
  std::string source = "oracle", constant;
  std::optional<fs::path> export_classes;
  fs::path export_corpus;
  Overrides rec;
  auto* export_cmd = app.add_subcommand("export-cassette", "Write a replay cassette for a corpus");
  export_cmd->add_option("--corpus", export_corpus, "Corpus (.jsonl or .csv)")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--classes", export_classes, "classes.json");
  export_cmd->add_option("--source", source, "oracle, adversarial, constant or backend")->capture_default_str();
  export_cmd->add_option("--constant", constant, "Answer for --source constant");
  export_cmd->add_option("--endpoint", rec.endpoint, "HTTP endpoint for --source backend");
  export_cmd->add_option("--model", rec.model, "Model name for --source backend");
  export_cmd->add_option("-o,--output", cassette_out, "Cassette path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) {
      const auto m = build_manifest(run);
      const auto models = cmd_train(m);
      fmt::print("trained {} fold models into {}\n", models.size(), (m.output_dir / "models").string());
    } else if (*eval_cmd) {
      const auto m = build_manifest(run);
      const auto r = cmd_evaluate(m);
      fmt::print("{}", effectiveness_text(r));
      fmt::print("{}", cost_text(r, m.cost));
      fmt::print("report bundle: {}\n", m.output_dir.string());
    } else if (*sweep_cmd) {
      const auto m = build_manifest(run);
      cmd_sweep(m);
      fmt::print("wrote {}\n", (m.output_dir / "sweep.csv").string());
    } else if (*report_cmd) {
      std::optional<CostModel> cost;
      if (dollars_per_hour || gpu_kw || carbon || pue) {
        CostModel c = fs::exists(run_dir / "manifest.json") ? load_manifest(run_dir / "manifest.json").cost : CostModel{};
        if (dollars_per_hour) c.dollars_per_hour = *dollars_per_hour;
        if (gpu_kw) c.gpu_power_kw = *gpu_kw;
        if (carbon) c.carbon_intensity = *carbon;
        if (pue) c.pue = *pue;
        cost = c;
      }
      cmd_report(run_dir, cost);
      fmt::print("re-rendered {}\n", run_dir.string());
    } else if (*route_cmd) {
      const auto corpus = load_input_corpus(corpus_path, corpus_classes);
      RouterConfig cfg;
      cfg.threshold = route_threshold;
      cfg.unparsed_policy = unparsed_policy_from_string(route_policy);
      cfg.backend.kind = backend_kind_from_string(route_backend);
      if (route_cassette) cfg.backend.cassette = *route_cassette;
      cfg.backend.endpoint = route_endpoint;
      cfg.backend.mock_completion = route_mock;
      cfg.validate();
      const auto r = cmd_route(model_path, corpus, read_embeddings(emb_path), cfg, out_dir);
      fmt::print("routed {} of {} documents to the LLM; outcomes in {}\n", r.llm_calls ? [&] {
        std::size_t n = 0;
        for (const auto& o : r.outcomes) n += o.route == Route::llm;
        return n;
      }() : 0, r.outcomes.size(), (out_dir / "outcomes.jsonl").string());
    } else if (*export_cmd) {
      const auto corpus = load_input_corpus(export_corpus, export_classes);
      const auto src = cassette_source_from_string(source);
      std::vector<CassetteEntry> entries;
      if (src == CassetteSource::backend) {
        BackendConfig cfg;
        cfg.kind = BackendKind::http;
        if (rec.endpoint) cfg.endpoint = *rec.endpoint;
        if (rec.model) cfg.model = *rec.model;
        if (cfg.endpoint.empty()) {
          if (const char* env = std::getenv("CASCADE_LLM_ENDPOINT")) cfg.endpoint = env;
        }
        cfg.validate();
        const auto backend = make_backend(cfg);
        entries = export_cassette(corpus, PromptTemplate{}, src, constant, backend.get(), &cfg);
      } else {
        entries = export_cassette(corpus, PromptTemplate{}, src, constant);
      }
      write_cassette(entries, cassette_out);
      fmt::print("wrote {} cassette entries to {}\n", entries.size(), cassette_out.string());
    }
  } catch (const InputError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
