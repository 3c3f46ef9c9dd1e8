#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cascade/backends.hpp"
#include "cascade/classifier.hpp"
#include "cascade/corpus.hpp"
#include "cascade/cost_ledger.hpp"
#include "cascade/embed_store.hpp"
#include "cascade/manifest.hpp"
#include "cascade/router.hpp"

namespace cascade {

/// Loaded inputs shared by every command: the corpus, its embeddings
/// aligned to corpus order, and the stratified fold plan.
struct Workspace {
  RunManifest manifest;
  Corpus corpus;
  EmbeddingMatrix embeddings;
  FoldPlan plan;
};

Workspace open_workspace(const RunManifest& manifest);

struct FoldResult {
  std::uint32_t fold = 0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::size_t test_size = 0;
  double threshold = 0.0;
  bool tuned = false;
  std::vector<TuningRow> tuning;
  std::map<Method, double> macro_f1;
  RoutedSubsetReport audit;
  TrainingMeta training;
  double ece = 0.0;  // local model on the test fold, 10 bins
  std::vector<RoutingOutcome> cascade_outcomes;
};

struct EvaluationResults {
  std::string dataset_name;
  std::vector<std::string> classes;
  std::uint32_t folds = 0;
  std::vector<Method> methods;
  std::vector<FoldResult> fold_results;
  std::map<Method, CostLedger> ledgers;
  TimingMode timing = TimingMode::measured;
};

/// Trains one model per fold on that fold's train split and writes
/// `<output>/models/fold<k>.cglr`. Returns the models in fold order.
std::vector<CalibratedModel> cmd_train(const RunManifest& manifest);

/// Runs the full protocol per fold (train, tune, route, score) without
/// writing anything. `tuning_backend` defaults per the manifest's tuning source.
EvaluationResults evaluate(const Workspace& ws, const CompletionBackend& backend,
                           const CompletionBackend* tuning_backend = nullptr);

/// evaluate() with backends from the manifest, then writes the report bundle
/// into the output directory.
EvaluationResults cmd_evaluate(const RunManifest& manifest);

struct SweepSeries {
  std::vector<double> thresholds;
  std::vector<double> macro_f1;        // mean over folds
  std::vector<double> instances_sent;  // mean over folds
  std::vector<double> pct_sent;
  std::vector<double> total_time_s;
  std::vector<std::vector<SweepPoint>> per_fold;
};

SweepSeries sweep_folds(const Workspace& ws, const CompletionBackend& backend);

/// sweep_folds() with the manifest backend; writes sweep.csv and sweep.txt.
SweepSeries cmd_sweep(const RunManifest& manifest);

/// Re-renders the report tables of an evaluated run directory from its
/// results.json, optionally with a different cost model.
void cmd_report(const std::filesystem::path& run_dir, const std::optional<CostModel>& cost_override);

/// Routes a corpus with a saved model; writes outcomes.jsonl (and audit.txt
/// when the corpus is labeled) into `out_dir`.
RouteResult cmd_route(const std::filesystem::path& model_path, const Corpus& corpus,
                      const EmbeddingMatrix& embeddings, const RouterConfig& config,
                      const std::filesystem::path& out_dir);

enum class CassetteSource { oracle, adversarial, constant, backend };

CassetteSource cassette_source_from_string(std::string_view name);

/// Builds a replay cassette with one entry per corpus document. `oracle`
/// answers the true label, `adversarial` the next class cyclically,
/// `constant` a fixed string, `backend` records live completions.
std::vector<CassetteEntry> export_cassette(const Corpus& corpus, const PromptTemplate& prompt, CassetteSource source,
                                           const std::string& constant_completion = {},
                                           const CompletionBackend* backend = nullptr,
                                           const BackendConfig* backend_config = nullptr);

/// results.json round trip (outcomes are stored separately as JSONL).
std::string results_to_json(const EvaluationResults& results);
EvaluationResults results_from_json(const std::string& text);

}  // namespace cascade
