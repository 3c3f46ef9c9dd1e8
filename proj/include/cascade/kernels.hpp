#pragma once

// Numeric kernels behind the calibrated classifier.
//
// Two implementations share one signature set:
//   kernels::ref  - straightforward serial loops, the reference for tests
//   kernels::omp  - OpenMP row-parallel versions used in production
//
// The OpenMP reductions split rows into a fixed set of contiguous chunks that
// does not depend on the thread count, and combine chunk partials in chunk
// order. Results are therefore bitwise reproducible for any OMP_NUM_THREADS,
// and agree with the reference to rounding.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cascade/matrix.hpp"

namespace cascade::kernels {

/// Linear softmax model parameters: weights is classes x dim row-major.
struct LinearParams {
  std::span<const double> weights;
  std::span<const double> bias;
  std::size_t classes = 0;
  std::size_t dim = 0;
};

/// Per-column mean and population standard deviation floored at `std_floor`.
struct ColumnMoments {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Numerically stable in-place softmax (max-shifted).
void softmax_inplace(std::span<double> logits);

namespace ref {

ColumnMoments column_moments(const DenseMatrix& x, double std_floor);

/// Mean cross-entropy + (lambda/2)||W||^2. Bias is not penalized.
double objective(const DenseMatrix& x, std::span<const std::uint32_t> y, const LinearParams& p, double lambda);

/// Returns the objective and writes its gradient into grad_w / grad_b.
double objective_gradient(const DenseMatrix& x, std::span<const std::uint32_t> y, const LinearParams& p,
                          double lambda, std::span<double> grad_w, std::span<double> grad_b);

/// Softmax probabilities for every row into `out` (rows x classes).
void predict_proba(const DenseMatrix& x, const LinearParams& p, DenseMatrix& out);

}  // namespace ref

namespace omp {

ColumnMoments column_moments(const DenseMatrix& x, double std_floor);
double objective(const DenseMatrix& x, std::span<const std::uint32_t> y, const LinearParams& p, double lambda);
double objective_gradient(const DenseMatrix& x, std::span<const std::uint32_t> y, const LinearParams& p,
                          double lambda, std::span<double> grad_w, std::span<double> grad_b);
void predict_proba(const DenseMatrix& x, const LinearParams& p, DenseMatrix& out);

/// Number of threads OpenMP would use for the next parallel region.
int max_threads();

}  // namespace omp

}  // namespace cascade::kernels
