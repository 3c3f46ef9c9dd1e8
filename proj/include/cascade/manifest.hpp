#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cascade/classifier.hpp"
#include "cascade/cost_ledger.hpp"
#include "cascade/llm_gateway.hpp"
#include "cascade/router.hpp"

namespace cascade {

/// Where validation-time routing gets its answers during threshold tuning.
enum class TuningSource {
  automatic,  // the run backend when it is mock/replay; an error for http
  backend,    // the run backend, including live http
  cassette,   // a separate replay cassette
  oracle,     // a perfect labeler built from validation labels
};

std::string_view to_string(TuningSource s);
TuningSource tuning_source_from_string(std::string_view name);

enum class Method { local, cascade, llm };

std::string_view to_string(Method m);
Method method_from_string(std::string_view name);

/// Everything needed to reproduce a run. Serialized as JSON with nested
/// sections; relative paths resolve against the manifest's directory.
struct RunManifest {
  std::string dataset_name = "dataset";
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> classes;
  std::filesystem::path embeddings;
  std::uint32_t folds = 5;
  std::uint64_t seed = 42;
  double validation_fraction = 0.1;
  std::optional<double> threshold;  // fixed threshold; tuned over `grid` when absent
  std::vector<double> grid = default_threshold_grid();
  std::vector<Method> methods = {Method::local, Method::cascade, Method::llm};
  TrainOptions classifier;
  BackendConfig backend;
  PromptTemplate prompt;
  UnparsedPolicy unparsed_policy = UnparsedPolicy::fallback_local;
  TuningSource tuning_source = TuningSource::automatic;
  std::optional<std::filesystem::path> tuning_cassette;
  TimingMode timing = TimingMode::measured;
  SimulatedRates rates;
  CostModel cost;
  std::filesystem::path output_dir = "run";

  void validate() const;
};

/// Parses manifest JSON. Unknown keys are rejected. Relative paths are
/// resolved against `base_dir`.
RunManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir);
RunManifest load_manifest(const std::filesystem::path& path);

/// Effective manifest as pretty JSON. The output directory is omitted so the
/// copy stored inside a run directory does not depend on where it lives.
std::string manifest_to_json(const RunManifest& manifest);

/// Applies CASCADE_LLM_ENDPOINT, when set, to the backend endpoint.
void apply_environment(RunManifest& manifest);

inline constexpr const char* kEndpointEnvVar = "CASCADE_LLM_ENDPOINT";

}  // namespace cascade
