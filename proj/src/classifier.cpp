#include "cascade/classifier.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "cascade/binary_io.hpp"
#include "cascade/checksum.hpp"
#include "cascade/errors.hpp"
#include "cascade/kernels.hpp"

namespace cascade {

ProbabilityVector ProbabilityVector::from(std::span<const double> probs) {
  ProbabilityVector out{std::vector<double>(probs.begin(), probs.end()), 0, probs.empty() ? 0.0 : probs[0]};
  for (std::size_t c = 1; c < probs.size(); ++c) {
    if (probs[c] > out.confidence) {
      out.confidence = probs[c];
      out.argmax = static_cast<ClassIndex>(c);
    }
  }
  return out;
}

CalibratedModel::CalibratedModel(std::size_t classes, std::size_t dim, std::vector<double> weights,
                                 std::vector<double> bias, FeatureScaler scaler, TrainingMeta meta)
    : classes_(classes),
      dim_(dim),
      weights_(std::move(weights)),
      bias_(std::move(bias)),
      scaler_(std::move(scaler)),
      meta_(meta) {
  if (classes_ < 2) throw InputError("model needs at least two classes");
  if (dim_ == 0) throw InputError("model dimension must be positive");
  if (weights_.size() != classes_ * dim_ || bias_.size() != classes_ || scaler_.mean.size() != dim_ ||
      scaler_.stddev.size() != dim_) {
    throw InputError("model parameter shapes are inconsistent");
  }
  for (const double s : scaler_.stddev) {
    if (!(s > 0.0)) throw InputError("scaler standard deviation must be positive");
  }
}

DenseMatrix CalibratedModel::standardize(const EmbeddingMatrix& x) const {
  if (x.dim() != dim_) {
    throw InputError(fmt::format("embedding dimension {} does not match model dimension {}", x.dim(), dim_));
  }
  DenseMatrix out(x.rows(), dim_);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    for (std::size_t j = 0; j < dim_; ++j) {
      out(i, j) = (static_cast<double>(row[j]) - scaler_.mean[j]) / scaler_.stddev[j];
    }
  }
  return out;
}

namespace {

DenseMatrix to_dense(const EmbeddingMatrix& x) {
  DenseMatrix out(x.rows(), x.dim());
  std::transform(x.values().begin(), x.values().end(), out.data.begin(),
                 [](float v) { return static_cast<double>(v); });
  return out;
}

double inf_norm(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (const double v : a) m = std::max(m, std::abs(v));
  for (const double v : b) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

CalibratedModel train(const EmbeddingMatrix& x, std::span<const ClassIndex> y, std::size_t classes,
                      const TrainOptions& options, std::vector<double>* trace) {
  if (x.rows() == 0) throw InputError("empty training set");
  if (x.rows() != y.size()) {
    throw InputError(fmt::format("{} embedding rows but {} labels", x.rows(), y.size()));
  }
  if (classes < 2) throw InputError("training needs at least two classes");
  std::set<ClassIndex> present;
  for (const auto label : y) {
    if (label >= classes) throw InputError(fmt::format("label {} outside {} classes", label, classes));
    present.insert(label);
  }
  if (present.size() < 2) throw InputError("single-class training set");
  if (!(options.lambda >= 0.0)) throw InputError("regularization strength must be non-negative");

  const std::size_t d = x.dim();
  const auto raw = to_dense(x);
  auto moments = kernels::omp::column_moments(raw, options.std_floor);
  FeatureScaler scaler{std::move(moments.mean), std::move(moments.stddev)};
  DenseMatrix xs(raw.rows, d);
  for (std::size_t i = 0; i < raw.rows; ++i)
    for (std::size_t j = 0; j < d; ++j) xs(i, j) = (raw(i, j) - scaler.mean[j]) / scaler.stddev[j];

  std::vector<double> w(classes * d, 0.0), b(classes, 0.0);
  std::vector<double> gw(w.size()), gb(b.size());
  std::vector<double> w_try(w.size()), b_try(b.size());
  auto params = [&](const std::vector<double>& ww, const std::vector<double>& bb) {
    return kernels::LinearParams{ww, bb, classes, d};
  };

  TrainingMeta meta;
  meta.lambda = options.lambda;
  double f = kernels::omp::objective_gradient(xs, y, params(w, b), options.lambda, gw, gb);
  if (trace) trace->push_back(f);
  double step = 1.0;
  for (;;) {
    const double ginf = inf_norm(gw, gb);
    meta.final_grad_inf = ginf;
    if (ginf < options.tol) {
      meta.converged = true;
      break;
    }
    if (meta.iterations >= options.max_iter) break;

    // Weight block is scaled by 1/(1+lambda) so a strong penalty does not pin the bias step.
    const double wscale = 1.0 / (1.0 + options.lambda);
    double gsq = 0.0;
    for (const double g : gw) gsq += wscale * g * g;
    for (const double g : gb) gsq += g * g;

    bool accepted = false;
    double t = step;
    double f_try = f;
    while (t > 1e-20) {
      for (std::size_t k = 0; k < w.size(); ++k) w_try[k] = w[k] - t * wscale * gw[k];
      for (std::size_t k = 0; k < b.size(); ++k) b_try[k] = b[k] - t * gb[k];
      f_try = kernels::omp::objective(xs, y, params(w_try, b_try), options.lambda);
      if (f_try <= f - options.armijo_c * t * gsq) {
        accepted = true;
        break;
      }
      t *= options.shrink;
    }
    if (!accepted) break;  // line search stalled at machine precision

    w.swap(w_try);
    b.swap(b_try);
    f = kernels::omp::objective_gradient(xs, y, params(w, b), options.lambda, gw, gb);
    if (trace) trace->push_back(f);
    ++meta.iterations;
    step = t * 2.0;
  }
  meta.final_objective = f;
  return CalibratedModel(classes, d, std::move(w), std::move(b), std::move(scaler), meta);
}

std::vector<ProbabilityVector> predict_proba(const CalibratedModel& model, const EmbeddingMatrix& x) {
  const auto xs = model.standardize(x);
  DenseMatrix probs;
  kernels::omp::predict_proba(xs, {model.weights(), model.bias(), model.classes(), model.dim()}, probs);
  std::vector<ProbabilityVector> out;
  out.reserve(x.rows());
  for (std::size_t i = 0; i < probs.rows; ++i) out.push_back(ProbabilityVector::from(probs.row(i)));
  return out;
}

double expected_calibration_error(std::span<const ProbabilityVector> probs, std::span<const ClassIndex> y,
                                  std::uint32_t bins) {
  if (bins < 1) throw InputError("ECE needs at least one bin");
  if (probs.size() != y.size()) {
    throw InputError(fmt::format("{} predictions but {} labels", probs.size(), y.size()));
  }
  if (probs.empty()) throw InputError("ECE of an empty prediction set");
  std::vector<double> conf_sum(bins, 0.0), correct(bins, 0.0), count(bins, 0.0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double c = probs[i].confidence;
    auto b = static_cast<std::size_t>(std::floor(c * bins));
    b = std::min<std::size_t>(b, bins - 1);
    conf_sum[b] += c;
    correct[b] += probs[i].argmax == y[i] ? 1.0 : 0.0;
    count[b] += 1.0;
  }
  const auto n = static_cast<double>(probs.size());
  double ece = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0.0) continue;
    ece += (count[b] / n) * std::abs(correct[b] / count[b] - conf_sum[b] / count[b]);
  }
  return ece;
}

namespace {
constexpr std::string_view kModelMagic = "CGLR";
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

std::vector<std::byte> encode_model(const CalibratedModel& model) {
  binary::Writer w;
  w.raw(kModelMagic);
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(model.classes()));
  w.u32(static_cast<std::uint32_t>(model.dim()));
  for (const double v : model.scaler().mean) w.f64(v);
  for (const double v : model.scaler().stddev) w.f64(v);
  for (const double v : model.weights()) w.f64(v);
  for (const double v : model.bias()) w.f64(v);
  const auto& m = model.meta();
  w.u32(m.iterations);
  w.f64(m.final_objective);
  w.f64(m.lambda);
  w.f64(m.final_grad_inf);
  w.u8(m.converged ? 1 : 0);
  auto& buf = w.buffer();
  w.u32(crc32(std::span<const std::byte>(buf).subspan(kModelMagic.size())));
  return std::move(buf);
}

CalibratedModel decode_model(std::span<const std::byte> bytes) {
  if (bytes.size() < kModelMagic.size() + 8 ||
      std::string_view(reinterpret_cast<const char*>(bytes.data()), kModelMagic.size()) != kModelMagic) {
    throw InputError("bad magic: not a CGLR model file");
  }
  const auto body = bytes.subspan(kModelMagic.size(), bytes.size() - kModelMagic.size() - 4);
  binary::Reader tail(bytes.subspan(bytes.size() - 4));
  const auto stored = tail.u32();
  binary::Reader r(body);
  const auto version = r.u32();
  if (version != kModelVersion) throw InputError(fmt::format("unsupported CGLR version {}", version));
  if (crc32(body) != stored) throw InputError("CRC mismatch in model file");
  const std::size_t classes = r.u32();
  const std::size_t dim = r.u32();
  auto read_vec = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = r.f64();
    return v;
  };
  FeatureScaler scaler;
  scaler.mean = read_vec(dim);
  scaler.stddev = read_vec(dim);
  auto weights = read_vec(classes * dim);
  auto bias = read_vec(classes);
  TrainingMeta meta;
  meta.iterations = r.u32();
  meta.final_objective = r.f64();
  meta.lambda = r.f64();
  meta.final_grad_inf = r.f64();
  meta.converged = r.u8() != 0;
  if (r.remaining() != 0) throw InputError("trailing bytes in model file");
  return CalibratedModel(classes, dim, std::move(weights), std::move(bias), std::move(scaler), meta);
}

void save_model(const CalibratedModel& model, const std::filesystem::path& path) {
  binary::write_all(path.string(), encode_model(model));
}

CalibratedModel load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError(fmt::format("model file '{}' not found", path.string()));
  try {
    return decode_model(binary::read_all(path.string()));
  } catch (const InputError& e) {
    throw InputError(fmt::format("'{}': {}", path.string(), e.what()));
  }
}

}  // namespace cascade
