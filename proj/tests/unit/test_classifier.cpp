#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cascade/classifier.hpp"
#include "cascade/errors.hpp"
#include "cascade/kernels.hpp"
#include "cascade/rng.hpp"
#include "synthetic.hpp"

using namespace cascade;
using cascade::testing::TempDir;

namespace {

EmbeddingMatrix matrix(const std::vector<std::vector<float>>& rows) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) ids.push_back("r" + std::to_string(i));
  return EmbeddingMatrix::from_rows(ids, rows);
}

// Samples x ~ N(0, I_d) and y ~ softmax(W x + b) for a fixed true model.
std::pair<EmbeddingMatrix, std::vector<ClassIndex>> logistic_sample(std::size_t n, std::size_t d, std::uint64_t seed) {
  Xoshiro256StarStar rng(seed);
  std::vector<double> w_true(d);
  for (auto& v : w_true) v = rng.normal();
  std::vector<std::vector<float>> rows;
  std::vector<ClassIndex> y;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> row(d);
    double z = 0.3;
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = static_cast<float>(rng.normal());
      z += w_true[j] * row[j];
    }
    const double p1 = 1.0 / (1.0 + std::exp(-z));
    y.push_back(rng.uniform01() < p1 ? 1 : 0);
    rows.push_back(std::move(row));
  }
  return {matrix(rows), y};
}

std::vector<double> priors(const std::vector<ClassIndex>& y, std::size_t c) {
  std::vector<double> p(c, 0.0);
  for (const auto v : y) p[v] += 1.0;
  for (auto& v : p) v /= static_cast<double>(y.size());
  return p;
}

}  // namespace

TEST_CASE("analytic gradient matches central differences") {
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    Xoshiro256StarStar rng(derive_seed(2024, {trial}));
    const std::size_t n = 2 + rng.uniform_below(20), d = 1 + rng.uniform_below(6), c = 2 + rng.uniform_below(3);
    DenseMatrix x(n, d);
    for (auto& v : x.data) v = rng.normal();
    std::vector<std::uint32_t> y(n);
    for (auto& v : y) v = static_cast<std::uint32_t>(rng.uniform_below(c));
    std::vector<double> theta(c * d + c);
    for (auto& v : theta) v = rng.normal();
    const double lambda = rng.uniform01() * 0.5;

    auto params = [&](const std::vector<double>& t) {
      return kernels::LinearParams{std::span<const double>(t).first(c * d), std::span<const double>(t).last(c), c, d};
    };
    std::vector<double> gw(c * d), gb(c);
    kernels::ref::objective_gradient(x, y, params(theta), lambda, gw, gb);
    std::vector<double> analytic = gw;
    analytic.insert(analytic.end(), gb.begin(), gb.end());

    std::vector<double> numeric(theta.size());
    const double h = 1e-5;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      auto tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      numeric[i] = (kernels::ref::objective(x, y, params(tp), lambda) - kernels::ref::objective(x, y, params(tm), lambda)) /
                   (2 * h);
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    const double rel = std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
    CAPTURE(trial);
    CHECK(rel < 1e-4);
  }
}

TEST_CASE("separable toy set is fit exactly") {
  const auto x = matrix({{0.f, 0.f}, {0.f, 1.f}, {3.f, 3.f}, {3.f, 4.f}});
  const std::vector<ClassIndex> y = {0, 0, 1, 1};
  const auto m = train(x, y, 2);
  CHECK(m.meta().converged);
  const auto p = predict_proba(m, x);
  for (std::size_t i = 0; i < 4; ++i) CHECK(p[i].argmax == y[i]);
}

TEST_CASE("no signal gives the class priors") {
  const auto x = matrix({{1.f, 2.f}, {1.f, 2.f}, {1.f, 2.f}, {1.f, 2.f}, {1.f, 2.f}});
  const std::vector<ClassIndex> y = {0, 1, 1, 1, 0};
  const auto m = train(x, y, 2);
  for (const auto& p : predict_proba(m, x)) {
    CHECK(p.probs[0] == doctest::Approx(0.4).epsilon(1e-3));
    CHECK(p.probs[1] == doctest::Approx(0.6).epsilon(1e-3));
  }
}

TEST_CASE("huge lambda shrinks weights to zero") {
  const auto [x, y] = logistic_sample(300, 4, 3);
  TrainOptions opts;
  opts.lambda = 1e6;
  const auto m = train(x, y, 2, opts);
  double winf = 0.0;
  for (const auto w : m.weights()) winf = std::max(winf, std::abs(w));
  CHECK(winf < 1e-3);
  const auto pri = priors(y, 2);
  for (const auto& p : predict_proba(m, x)) CHECK(std::abs(p.probs[1] - pri[1]) < 1e-3);
}

TEST_CASE("zero model is uniform and the binary case is a sigmoid") {
  const FeatureScaler unit{{0.0, 0.0}, {1.0, 1.0}};
  const auto x = matrix({{0.3f, -2.f}, {5.f, 1.f}});
  const CalibratedModel zero(3, 2, std::vector<double>(6, 0.0), std::vector<double>(3, 0.0), unit);
  for (const auto& p : predict_proba(zero, x)) {
    for (const auto v : p.probs) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(p.argmax == 0);
  }
  // Class-1 logit margin z = 0.7 * x0 - 0.2.
  const CalibratedModel bin(2, 2, {0.0, 0.0, 0.7, 0.0}, {0.0, -0.2}, unit);
  const auto p = predict_proba(bin, x);
  for (std::size_t i = 0; i < 2; ++i) {
    const double z = 0.7 * x.row(i)[0] - 0.2;
    CHECK(p[i].probs[1] == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-14));
  }
  const auto half = predict_proba(CalibratedModel(2, 2, std::vector<double>(4, 0.0), {0.0, 0.0}, unit), x);
  CHECK(half[0].probs[0] == 0.5);
  CHECK(half[0].probs[1] == 0.5);
}

TEST_CASE("predictions match an independent softmax") {
  Xoshiro256StarStar rng(77);
  const std::size_t c = 4, d = 3;
  std::vector<double> w(c * d), b(c), mean(d), sd(d);
  for (auto& v : w) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  for (auto& v : mean) v = rng.normal();
  for (auto& v : sd) v = 0.5 + rng.uniform01();
  const CalibratedModel m(c, d, w, b, FeatureScaler{mean, sd});
  std::vector<std::vector<float>> rows(5, std::vector<float>(d));
  for (auto& r : rows)
    for (auto& v : r) v = static_cast<float>(2.0 * rng.normal());
  const auto x = matrix(rows);
  const auto p = predict_proba(m, x);
  for (std::size_t i = 0; i < 5; ++i) {
    std::vector<double> z(c);
    for (std::size_t k = 0; k < c; ++k) {
      z[k] = b[k];
      for (std::size_t j = 0; j < d; ++j) z[k] += w[k * d + j] * ((rows[i][j] - mean[j]) / sd[j]);
    }
    double denom = 0.0;
    for (const auto v : z) denom += std::exp(v);
    for (std::size_t k = 0; k < c; ++k) CHECK(std::abs(p[i].probs[k] - std::exp(z[k]) / denom) < 1e-12);
    CHECK(p[i].confidence == *std::max_element(p[i].probs.begin(), p[i].probs.end()));
  }
}

TEST_CASE("objective decreases monotonically and training is deterministic") {
  const auto [x, y] = logistic_sample(400, 5, 8);
  std::vector<double> trace;
  const auto m = train(x, y, 2, {}, &trace);
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
  CHECK(m.meta().final_objective == trace.back());
  CHECK(m.meta().converged);
  CHECK(m.meta().final_grad_inf < 1e-6);
  CHECK(train(x, y, 2) == m);
}

TEST_CASE("row permutation leaves the model unchanged up to rounding") {
  const auto [x, y] = logistic_sample(300, 3, 21);
  std::vector<std::size_t> perm(300);
  std::iota(perm.begin(), perm.end(), 0);
  Xoshiro256StarStar rng(5);
  shuffle(std::span<std::size_t>(perm), rng);
  std::vector<std::string> ids;
  std::vector<ClassIndex> yp;
  for (const auto i : perm) {
    ids.push_back(x.ids()[i]);
    yp.push_back(y[i]);
  }
  const auto xp = align(x, ids);
  const auto a = train(x, y, 2);
  const auto b = train(xp, yp, 2);
  for (std::size_t i = 0; i < a.weights().size(); ++i) CHECK(a.weights()[i] == doctest::Approx(b.weights()[i]).epsilon(1e-5));
}

TEST_CASE("probabilities stay on the simplex") {
  const auto [x, y] = logistic_sample(2000, 5, 1);
  const auto m = train(x, y, 2);
  for (const auto& p : predict_proba(m, x)) {
    double s = 0.0;
    for (const auto v : p.probs) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("a well-specified model is calibrated") {
  const auto [x, y] = logistic_sample(2000, 5, 12345);
  const auto m = train(x, y, 2);
  const auto p = predict_proba(m, x);
  CHECK(expected_calibration_error(p, y, 10) < 0.05);
}

TEST_CASE("expected calibration error examples") {
  auto pv = [](double conf, ClassIndex cls) {
    std::vector<double> probs(2);
    probs[cls] = conf;
    probs[1 - cls] = 1.0 - conf;
    return ProbabilityVector::from(probs);
  };
  const std::vector<ProbabilityVector> perfect = {pv(1.0, 0), pv(1.0, 1)};
  CHECK(expected_calibration_error(perfect, std::vector<ClassIndex>{0, 1}, 10) == 0.0);
  CHECK(expected_calibration_error(perfect, std::vector<ClassIndex>{0, 0}, 10) == 0.5);
  const std::vector<ProbabilityVector> four = {pv(0.6, 1), pv(0.6, 1), pv(0.9, 0), pv(0.9, 0)};
  CHECK(expected_calibration_error(four, std::vector<ClassIndex>{1, 0, 0, 0}, 10) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("argmax ties go to the lowest index") {
  const std::vector<double> p = {0.2, 0.4, 0.4};
  const auto v = ProbabilityVector::from(p);
  CHECK(v.argmax == 1);
  CHECK(v.confidence == 0.4);
}

TEST_CASE("training input errors") {
  const auto x = matrix({{0.f}, {1.f}});
  CHECK_THROWS_AS(train(x, std::vector<ClassIndex>{1, 1}, 2), InputError);
  CHECK_THROWS_AS(train(x, std::vector<ClassIndex>{0}, 2), InputError);
  CHECK_THROWS_AS(train(x, std::vector<ClassIndex>{0, 2}, 2), InputError);
}

TEST_CASE("model files round-trip and detect corruption") {
  TempDir dir;
  const auto [x, y] = logistic_sample(100, 3, 4);
  const auto m = train(x, y, 2);
  save_model(m, dir / "m.cglr");
  CHECK(load_model(dir / "m.cglr") == m);
  auto bytes = encode_model(m);
  bytes[bytes.size() / 2] ^= std::byte{0x40};
  CHECK_THROWS_AS(decode_model(bytes), InputError);
  bytes = encode_model(m);
  bytes.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_model(bytes), InputError);
  CHECK_THROWS_AS(load_model(dir / "absent.cglr"), InputError);
}
