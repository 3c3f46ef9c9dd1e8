#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cascade/classifier.hpp"
#include "cascade/corpus.hpp"
#include "cascade/cost_ledger.hpp"
#include "cascade/embed_store.hpp"
#include "cascade/errors.hpp"
#include "cascade/llm_gateway.hpp"

namespace cascade {

enum class Route { local, llm };
enum class UnparsedPolicy { fallback_local, error };

std::string_view to_string(Route r);
std::string_view to_string(UnparsedPolicy p);
UnparsedPolicy unparsed_policy_from_string(std::string_view name);

struct RouterConfig {
  double threshold = 0.95;  // documents with confidence strictly below go to the LLM
  UnparsedPolicy unparsed_policy = UnparsedPolicy::fallback_local;
  PromptTemplate prompt;
  BackendConfig backend;

  void validate() const;
};

/// The routing rule: strictly-less-than, so confidence == threshold stays local.
constexpr bool routes_to_llm(double confidence, double threshold) { return confidence < threshold; }

struct RoutingOutcome {
  std::string document_id;
  double confidence = 0.0;
  Route route = Route::local;
  ClassIndex local_label = 0;
  std::optional<LlmVerdict> llm_verdict;
  ClassIndex final_label = 0;
};

struct RouteResult {
  std::vector<RoutingOutcome> outcomes;
  double prediction_seconds = 0.0;  // wall time of predict_proba
  double llm_seconds = 0.0;         // wall time of the LLM batch
  std::size_t llm_calls = 0;        // attempts, including retries
};

/// Raised under UnparsedPolicy::error when a routed document gets no label.
class RoutingError : public EvaluationError {
 public:
  RoutingError(const std::string& what, std::size_t completed) : EvaluationError(what), completed_(completed) {}
  std::size_t completed() const { return completed_; }

 private:
  std::size_t completed_;
};

/// Cascade routing over a document set. `embeddings` must hold the documents'
/// rows in the same order as `docs`.
RouteResult route(const CalibratedModel& model, const EmbeddingMatrix& embeddings, const Corpus& docs,
                  const RouterConfig& config, const CompletionBackend& backend);

/// Same as route() with probabilities computed by the caller.
RouteResult route_probabilities(std::span<const ProbabilityVector> probs, const Corpus& docs,
                                const RouterConfig& config, const CompletionBackend& backend);

/// LLM-only baseline: every document goes to the backend regardless of
/// confidence; unparsed verdicts follow the configured policy.
RouteResult route_all_to_llm(std::span<const ProbabilityVector> probs, const Corpus& docs, const RouterConfig& config,
                             const CompletionBackend& backend);

/// {0.50, 0.55, ..., 0.95, 0.99}
std::vector<double> default_threshold_grid();

/// Throws InputError unless non-empty, strictly increasing, within (0, 1].
void validate_grid(std::span<const double> grid);

struct TuningRow {
  double threshold = 0.0;
  double macro_f1 = 0.0;
  std::size_t routed = 0;
};

struct TuningResult {
  double best_threshold = 0.0;
  std::vector<TuningRow> table;
  double llm_seconds = 0.0;
  double prediction_seconds = 0.0;
  std::size_t llm_calls = 0;
};

/// Picks the grid threshold with the highest validation cascade Macro-F1,
/// ties going to the smaller threshold. Each validation document is sent to
/// the backend at most once; every grid point reuses those verdicts.
TuningResult tune_threshold(const CalibratedModel& model, const EmbeddingMatrix& embeddings, const Corpus& validation,
                            std::span<const double> grid, const RouterConfig& config,
                            const CompletionBackend& backend);

struct SweepPoint {
  double threshold = 0.0;
  double macro_f1 = 0.0;
  std::size_t instances_sent = 0;
  double pct_sent = 0.0;  // percent of the test set
  double total_time_s = 0.0;
};

/// One full cascade evaluation per grid point. `base_seconds` (e.g. the
/// representation and training time) is added to every point's total;
/// `clock` converts each route's measured time.
std::vector<SweepPoint> sweep(const CalibratedModel& model, const EmbeddingMatrix& embeddings, const Corpus& test,
                              const RouterConfig& config, std::span<const double> grid,
                              const CompletionBackend& backend, double base_seconds = 0.0,
                              const PhaseClock* clock = nullptr);

struct RoutedSubsetReport {
  std::size_t routed = 0;
  std::size_t total = 0;
  double pct_routed = 0.0;
  std::optional<double> routed_macro_f1;  // nullopt when nothing was routed
  std::optional<double> local_macro_f1;   // nullopt when everything was routed
  double overall_macro_f1 = 0.0;
};

RoutedSubsetReport audit(std::span<const RoutingOutcome> outcomes, std::span<const ClassIndex> labels,
                         std::size_t classes);

/// One JSON object per line: id, confidence, route, local_label, llm_label,
/// final_label, latency. Labels are class names; llm_label is null unless a
/// routed verdict parsed.
void write_outcomes_jsonl(std::span<const RoutingOutcome> outcomes, const std::vector<std::string>& classes,
                          const std::filesystem::path& path);
std::string outcomes_jsonl(std::span<const RoutingOutcome> outcomes, const std::vector<std::string>& classes);

/// CSV header: threshold,macro_f1,instances_sent,pct,total_time_s
std::string sweep_csv(std::span<const SweepPoint> points);

}  // namespace cascade
