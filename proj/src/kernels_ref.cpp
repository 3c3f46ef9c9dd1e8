#include <algorithm>
#include <cmath>

#include "cascade/kernels.hpp"

namespace cascade::kernels {

void softmax_inplace(std::span<double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (auto& z : logits) {
    z = std::exp(z - m);
    sum += z;
  }
  for (auto& z : logits) z /= sum;
}

namespace ref {

namespace {

void logits_row(std::span<const double> x, const LinearParams& p, std::span<double> z) {
  for (std::size_t c = 0; c < p.classes; ++c) {
    const double* w = p.weights.data() + c * p.dim;
    double acc = p.bias[c];
    for (std::size_t j = 0; j < p.dim; ++j) acc += w[j] * x[j];
    z[c] = acc;
  }
}

double l2_penalty(const LinearParams& p, double lambda) {
  double sq = 0.0;
  for (const double w : p.weights) sq += w * w;
  return 0.5 * lambda * sq;
}

}  // namespace

ColumnMoments column_moments(const DenseMatrix& x, double std_floor) {
  ColumnMoments m{std::vector<double>(x.cols, 0.0), std::vector<double>(x.cols, 0.0)};
  const auto n = static_cast<double>(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < x.cols; ++j) m.mean[j] += x(i, j);
  }
  for (auto& v : m.mean) v /= n;
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double d = x(i, j) - m.mean[j];
      m.stddev[j] += d * d;
    }
  }
  for (auto& v : m.stddev) v = std::max(std::sqrt(v / n), std_floor);
  return m;
}

double objective(const DenseMatrix& x, std::span<const std::uint32_t> y, const LinearParams& p, double lambda) {
  std::vector<double> z(p.classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    logits_row(x.row(i), p, z);
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (const double v : z) s += std::exp(v - m);
    loss += m + std::log(s) - z[y[i]];
  }
  return loss / static_cast<double>(x.rows) + l2_penalty(p, lambda);
}

double objective_gradient(const DenseMatrix& x, std::span<const std::uint32_t> y, const LinearParams& p,
                          double lambda, std::span<double> grad_w, std::span<double> grad_b) {
  std::fill(grad_w.begin(), grad_w.end(), 0.0);
  std::fill(grad_b.begin(), grad_b.end(), 0.0);
  std::vector<double> z(p.classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto xi = x.row(i);
    logits_row(xi, p, z);
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (const double v : z) s += std::exp(v - m);
    loss += m + std::log(s) - z[y[i]];
    for (std::size_t c = 0; c < p.classes; ++c) {
      const double r = std::exp(z[c] - m) / s - (c == y[i] ? 1.0 : 0.0);
      grad_b[c] += r;
      double* g = grad_w.data() + c * p.dim;
      for (std::size_t j = 0; j < p.dim; ++j) g[j] += r * xi[j];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(x.rows);
  for (std::size_t k = 0; k < grad_w.size(); ++k) grad_w[k] = grad_w[k] * inv_n + lambda * p.weights[k];
  for (auto& g : grad_b) g *= inv_n;
  return loss * inv_n + l2_penalty(p, lambda);
}

void predict_proba(const DenseMatrix& x, const LinearParams& p, DenseMatrix& out) {
  out = DenseMatrix(x.rows, p.classes);
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto z = out.row(i);
    logits_row(x.row(i), p, z);
    softmax_inplace(z);
  }
}

}  // namespace ref
}  // namespace cascade::kernels
