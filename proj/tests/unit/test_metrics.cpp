#include <doctest.h>

#include <cmath>
#include <limits>

#include "cascade/metrics.hpp"
#include "cascade/rng.hpp"

using namespace cascade;

namespace {

// Confusion-matrix oracle: F1_c = 2 P R / (P + R), 0 when undefined.
double confusion_oracle(const std::vector<ClassIndex>& t, const std::vector<ClassIndex>& p, std::size_t c) {
  std::vector<std::vector<double>> cm(c, std::vector<double>(c, 0.0));
  for (std::size_t i = 0; i < t.size(); ++i) cm[t[i]][p[i]] += 1.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    double predicted = 0.0, actual = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      predicted += cm[j][k];
      actual += cm[k][j];
    }
    const double tp = cm[k][k];
    if (predicted == 0.0 || actual == 0.0 || tp == 0.0) continue;
    const double prec = tp / predicted, rec = tp / actual;
    sum += 2.0 * prec * rec / (prec + rec);
  }
  return sum / static_cast<double>(c);
}

}  // namespace

TEST_CASE("macro F1 anchors") {
  CHECK(macro_f1(std::vector<ClassIndex>{1, 1, 0, 0}, std::vector<ClassIndex>{1, 0, 0, 0}, 2) ==
        doctest::Approx(11.0 / 15.0).epsilon(1e-15));
  CHECK(macro_f1(std::vector<ClassIndex>{0, 0, 1, 1}, std::vector<ClassIndex>{0, 0, 0, 0}, 2) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(macro_f1(std::vector<ClassIndex>{0, 1, 1, 0}, std::vector<ClassIndex>{0, 1, 1, 0}, 2) == 1.0);
  // An absent class still counts in the denominator.
  CHECK(macro_f1(std::vector<ClassIndex>{0, 0}, std::vector<ClassIndex>{0, 0}, 2) == 0.5);
}

TEST_CASE("macro F1 matches the confusion-matrix oracle") {
  Xoshiro256StarStar rng(9);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t c = 2 + rng.uniform_below(4), n = 1 + rng.uniform_below(60);
    std::vector<ClassIndex> t(n), p(n);
    for (auto& v : t) v = static_cast<ClassIndex>(rng.uniform_below(c));
    for (std::size_t i = 0; i < n; ++i) p[i] = rng.uniform01() < 0.6 ? t[i] : static_cast<ClassIndex>(rng.uniform_below(c));
    const double got = macro_f1(t, p, c);
    CHECK(std::abs(got - confusion_oracle(t, p, c)) <= 1e-12);
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
    // Relabeling both sides with the same permutation keeps the score.
    std::vector<ClassIndex> perm(c);
    for (std::size_t k = 0; k < c; ++k) perm[k] = static_cast<ClassIndex>((k + 1) % c);
    std::vector<ClassIndex> t2(n), p2(n);
    for (std::size_t i = 0; i < n; ++i) {
      t2[i] = perm[t[i]];
      p2[i] = perm[p[i]];
    }
    CHECK(std::abs(macro_f1(t2, p2, c) - got) <= 1e-12);
  }
}

TEST_CASE("fold summaries") {
  const auto flat = fold_summary(std::vector<double>{0.7, 0.7, 0.7});
  CHECK(flat.mean == doctest::Approx(0.7));
  CHECK(flat.half_width == 0.0);

  const auto s = fold_summary(std::vector<double>{0.9, 0.9, 0.9, 0.9, 1.0}, "m");
  CHECK(s.method == "m");
  CHECK(s.mean == doctest::Approx(0.92));
  CHECK(s.stddev == doctest::Approx(std::sqrt(0.002)));
  CHECK(s.half_width == doctest::Approx(2.776 * std::sqrt(0.002) / std::sqrt(5.0)));
  CHECK(s.half_width == doctest::Approx(0.0555).epsilon(1e-3));

  const auto two = fold_summary(std::vector<double>{0.0, 1.0});
  CHECK(two.mean == 0.5);
  CHECK(two.half_width == doctest::Approx(6.353).epsilon(1e-4));
}

TEST_CASE("t critical values") {
  CHECK(t_critical(0.05, 1) == 12.706);
  CHECK(t_critical(0.05, 4) == 2.776);
  CHECK(t_critical(0.05, 30) == 2.042);
  CHECK(t_critical(0.05, 1000) == 1.960);
  CHECK(t_critical(0.10, 4) == 2.132);
  CHECK(t_critical(0.01, 4) == 4.604);
  CHECK_THROWS(t_critical(0.05, 0));
  CHECK_THROWS(t_critical(0.2, 4));
}

TEST_CASE("paired t-test examples") {
  const std::vector<double> a = {0.80, 0.82, 0.81, 0.83, 0.79}, b = {0.70, 0.71, 0.69, 0.72, 0.68};
  const auto r = paired_t_test(a, b);
  CHECK(r.mean_diff == doctest::Approx(0.11));
  CHECK(r.sd_diff == doctest::Approx(0.0070711).epsilon(1e-5));
  CHECK(r.t == doctest::Approx(34.78505).epsilon(1e-6));
  CHECK(r.verdict == Verdict::a_better);

  const auto same = paired_t_test(a, a);
  CHECK(same.verdict == Verdict::tie);
  CHECK(same.t == 0.0);

  std::vector<double> shifted(b);
  for (auto& v : shifted) v += 0.1;
  const auto inf = paired_t_test(shifted, b);
  CHECK(inf.verdict == Verdict::a_better);
  CHECK(inf.t == std::numeric_limits<double>::infinity());
  CHECK(paired_t_test(b, shifted).verdict == Verdict::b_better);

  const auto noisy = paired_t_test(std::vector<double>{0.5, 0.6, 0.4}, std::vector<double>{0.55, 0.5, 0.45});
  CHECK(noisy.verdict == Verdict::tie);
  CHECK(to_string(Verdict::a_better) == "A_BETTER");
}

TEST_CASE("paired t-test is antisymmetric") {
  Xoshiro256StarStar rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.uniform_below(9);
    std::vector<double> a(k), b(k);
    for (std::size_t i = 0; i < k; ++i) {
      a[i] = rng.uniform01();
      b[i] = a[i] + 0.1 * rng.normal() - 0.02;
    }
    const auto ab = paired_t_test(a, b), ba = paired_t_test(b, a);
    CHECK(ab.t == -ba.t);
    CHECK(ab.verdict == (ba.verdict == Verdict::a_better ? Verdict::b_better
                         : ba.verdict == Verdict::b_better ? Verdict::a_better
                                                           : Verdict::tie));
  }
}

TEST_CASE("metric argument errors") {
  CHECK_THROWS(macro_f1(std::vector<ClassIndex>{0}, std::vector<ClassIndex>{0, 1}, 2));
  CHECK_THROWS(paired_t_test(std::vector<double>{1.0}, std::vector<double>{1.0}));
  CHECK_THROWS(paired_t_test(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0}));
  CHECK_THROWS(fold_summary(std::vector<double>{1.0}));
}
