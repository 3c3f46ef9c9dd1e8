#include <omp.h>

#include <algorithm>
#include <cmath>

#include "cascade/kernels.hpp"

namespace cascade::kernels::omp {

namespace {

// Chunking depends only on the row count, never on the thread count.
constexpr std::size_t kMinChunkRows = 256;
constexpr std::size_t kMaxChunks = 64;

struct Chunking {
  std::size_t count;
  std::size_t rows;
  std::size_t begin(std::size_t c) const { return c * rows / count; }
  std::size_t end(std::size_t c) const { return (c + 1) * rows / count; }
};

Chunking chunking(std::size_t rows) {
  const std::size_t wanted = (rows + kMinChunkRows - 1) / kMinChunkRows;
  return {std::clamp<std::size_t>(wanted, 1, kMaxChunks), rows};
}

inline void logits_row(const double* x, const LinearParams& p, double* z) {
  for (std::size_t c = 0; c < p.classes; ++c) {
    const double* w = p.weights.data() + c * p.dim;
    double acc = 0.0;
#pragma omp simd reduction(+ : acc)
    for (std::size_t j = 0; j < p.dim; ++j) acc += w[j] * x[j];
    z[c] = acc + p.bias[c];
  }
}

double l2_penalty(const LinearParams& p, double lambda) {
  double sq = 0.0;
  for (const double w : p.weights) sq += w * w;
  return 0.5 * lambda * sq;
}

// Row loss given logits; returns (logsumexp - z_y) and leaves z untouched.
inline double row_loss(const double* z, std::size_t classes, std::uint32_t label, double& max_out,
                       double& sum_out) {
  double m = z[0];
  for (std::size_t c = 1; c < classes; ++c) m = std::max(m, z[c]);
  double s = 0.0;
  for (std::size_t c = 0; c < classes; ++c) s += std::exp(z[c] - m);
  max_out = m;
  sum_out = s;
  return m + std::log(s) - z[label];
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }

ColumnMoments column_moments(const DenseMatrix& x, double std_floor) {
  const auto ch = chunking(x.rows);
  const auto d = x.cols;
  std::vector<double> partial(ch.count * d, 0.0);
  const auto n = static_cast<double>(x.rows);

#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < ch.count; ++c) {
    double* acc = partial.data() + c * d;
    for (std::size_t i = ch.begin(c); i < ch.end(c); ++i) {
      const double* xi = x.data.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) acc[j] += xi[j];
    }
  }
  ColumnMoments m{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t c = 0; c < ch.count; ++c)
    for (std::size_t j = 0; j < d; ++j) m.mean[j] += partial[c * d + j];
  for (auto& v : m.mean) v /= n;

  std::fill(partial.begin(), partial.end(), 0.0);
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < ch.count; ++c) {
    double* acc = partial.data() + c * d;
    for (std::size_t i = ch.begin(c); i < ch.end(c); ++i) {
      const double* xi = x.data.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = xi[j] - m.mean[j];
        acc[j] += diff * diff;
      }
    }
  }
  for (std::size_t c = 0; c < ch.count; ++c)
    for (std::size_t j = 0; j < d; ++j) m.stddev[j] += partial[c * d + j];
  for (auto& v : m.stddev) v = std::max(std::sqrt(v / n), std_floor);
  return m;
}

double objective(const DenseMatrix& x, std::span<const std::uint32_t> y, const LinearParams& p, double lambda) {
  const auto ch = chunking(x.rows);
  std::vector<double> partial(ch.count, 0.0);

#pragma omp parallel
  {
    std::vector<double> z(p.classes);
#pragma omp for schedule(static)
    for (std::size_t c = 0; c < ch.count; ++c) {
      double loss = 0.0;
      for (std::size_t i = ch.begin(c); i < ch.end(c); ++i) {
        logits_row(x.data.data() + i * x.cols, p, z.data());
        double m = 0.0, s = 0.0;
        loss += row_loss(z.data(), p.classes, y[i], m, s);
      }
      partial[c] = loss;
    }
  }
  double loss = 0.0;
  for (const double v : partial) loss += v;
  return loss / static_cast<double>(x.rows) + l2_penalty(p, lambda);
}

double objective_gradient(const DenseMatrix& x, std::span<const std::uint32_t> y, const LinearParams& p,
                          double lambda, std::span<double> grad_w, std::span<double> grad_b) {
  const auto ch = chunking(x.rows);
  const std::size_t stride = p.classes * p.dim + p.classes;
  std::vector<double> partial(ch.count * stride, 0.0);
  std::vector<double> partial_loss(ch.count, 0.0);

#pragma omp parallel
  {
    std::vector<double> z(p.classes);
#pragma omp for schedule(static)
    for (std::size_t c = 0; c < ch.count; ++c) {
      double* gw = partial.data() + c * stride;
      double* gb = gw + p.classes * p.dim;
      double loss = 0.0;
      for (std::size_t i = ch.begin(c); i < ch.end(c); ++i) {
        const double* xi = x.data.data() + i * x.cols;
        logits_row(xi, p, z.data());
        double m = 0.0, s = 0.0;
        loss += row_loss(z.data(), p.classes, y[i], m, s);
        for (std::size_t k = 0; k < p.classes; ++k) {
          const double r = std::exp(z[k] - m) / s - (k == y[i] ? 1.0 : 0.0);
          gb[k] += r;
          double* g = gw + k * p.dim;
#pragma omp simd
          for (std::size_t j = 0; j < p.dim; ++j) g[j] += r * xi[j];
        }
      }
      partial_loss[c] = loss;
    }
  }

  std::fill(grad_w.begin(), grad_w.end(), 0.0);
  std::fill(grad_b.begin(), grad_b.end(), 0.0);
  double loss = 0.0;
  for (std::size_t c = 0; c < ch.count; ++c) {
    const double* gw = partial.data() + c * stride;
    const double* gb = gw + p.classes * p.dim;
    for (std::size_t k = 0; k < grad_w.size(); ++k) grad_w[k] += gw[k];
    for (std::size_t k = 0; k < grad_b.size(); ++k) grad_b[k] += gb[k];
    loss += partial_loss[c];
  }
  const double inv_n = 1.0 / static_cast<double>(x.rows);
  for (std::size_t k = 0; k < grad_w.size(); ++k) grad_w[k] = grad_w[k] * inv_n + lambda * p.weights[k];
  for (auto& g : grad_b) g *= inv_n;
  return loss * inv_n + l2_penalty(p, lambda);
}

void predict_proba(const DenseMatrix& x, const LinearParams& p, DenseMatrix& out) {
  out = DenseMatrix(x.rows, p.classes);
  const auto n = static_cast<std::ptrdiff_t>(x.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto z = out.row(static_cast<std::size_t>(i));
    logits_row(x.data.data() + static_cast<std::size_t>(i) * x.cols, p, z.data());
    softmax_inplace(z);
  }
}

}  // namespace cascade::kernels::omp
