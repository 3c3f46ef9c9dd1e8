#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cascade/corpus.hpp"
#include "cascade/embed_store.hpp"
#include "cascade/matrix.hpp"

namespace cascade {

struct TrainOptions {
  double lambda = 1e-2;
  double tol = 1e-6;
  std::uint32_t max_iter = 5000;
  double armijo_c = 1e-4;
  double shrink = 0.5;
  double std_floor = 1e-8;
};

struct TrainingMeta {
  std::uint32_t iterations = 0;
  double final_objective = 0.0;
  double lambda = 0.0;
  double final_grad_inf = 0.0;
  /// False when max_iter ran out or the line search stalled. A warning, not an error.
  bool converged = false;

  bool operator==(const TrainingMeta&) const = default;
};

struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool operator==(const FeatureScaler&) const = default;
};

/// Class probabilities for one input. `argmax` takes the lowest index on ties
/// and `confidence` is the maximum probability.
struct ProbabilityVector {
  std::vector<double> probs;
  ClassIndex argmax = 0;
  double confidence = 0.0;

  static ProbabilityVector from(std::span<const double> probs);
};

/// L2-regularized multinomial logistic regression over standardized features.
class CalibratedModel {
 public:
  CalibratedModel(std::size_t classes, std::size_t dim, std::vector<double> weights, std::vector<double> bias,
                  FeatureScaler scaler, TrainingMeta meta = {});

  std::size_t classes() const { return classes_; }
  std::size_t dim() const { return dim_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& bias() const { return bias_; }
  const FeatureScaler& scaler() const { return scaler_; }
  const TrainingMeta& meta() const { return meta_; }

  /// Applies the stored scaler to raw rows.
  DenseMatrix standardize(const EmbeddingMatrix& x) const;

  bool operator==(const CalibratedModel&) const = default;

 private:
  std::size_t classes_;
  std::size_t dim_;
  std::vector<double> weights_;  // classes x dim
  std::vector<double> bias_;
  FeatureScaler scaler_;
  TrainingMeta meta_;
};

/// Full-batch gradient descent with Armijo backtracking. Deterministic.
/// `classes` fixes C; labels must be < classes and at least two distinct
/// labels must be present. Optionally records the objective after every
/// accepted step into `trace`.
CalibratedModel train(const EmbeddingMatrix& x, std::span<const ClassIndex> y, std::size_t classes,
                      const TrainOptions& options = {}, std::vector<double>* trace = nullptr);

std::vector<ProbabilityVector> predict_proba(const CalibratedModel& model, const EmbeddingMatrix& x);

/// Equal-width-bin ECE: sum over non-empty bins of (n_b/n)|acc_b - conf_b|.
/// Confidence c lands in bin min(floor(c * bins), bins - 1).
double expected_calibration_error(std::span<const ProbabilityVector> probs, std::span<const ClassIndex> y,
                                  std::uint32_t bins);

/// CGLR persistence: "CGLR" | u32 version | u32 C | u32 d | f64 mean[d]
/// | f64 std[d] | f64 W[C*d] | f64 b[C] | u32 iterations | f64 objective
/// | f64 lambda | f64 grad_inf | u8 converged | u32 CRC32 (bytes after magic).
std::vector<std::byte> encode_model(const CalibratedModel& model);
CalibratedModel decode_model(std::span<const std::byte> bytes);
void save_model(const CalibratedModel& model, const std::filesystem::path& path);
CalibratedModel load_model(const std::filesystem::path& path);

}  // namespace cascade
