#include "cascade/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "cascade/errors.hpp"

namespace cascade {

double macro_f1(std::span<const ClassIndex> y_true, std::span<const ClassIndex> y_pred, std::size_t classes) {
  if (y_true.size() != y_pred.size()) {
    throw InputError(fmt::format("macro_f1: {} true labels vs {} predictions", y_true.size(), y_pred.size()));
  }
  if (y_true.empty()) throw InputError("macro_f1: empty input");
  if (classes == 0) throw InputError("macro_f1: zero classes");
  std::vector<std::size_t> tp(classes, 0), pred_count(classes, 0), true_count(classes, 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] >= classes || y_pred[i] >= classes) {
      throw InputError(fmt::format("macro_f1: label out of range at position {}", i));
    }
    ++true_count[y_true[i]];
    ++pred_count[y_pred[i]];
    if (y_true[i] == y_pred[i]) ++tp[y_true[i]];
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    // F1 = 2TP / (|pred c| + |true c|), equal to 2PR/(P+R) whenever both are defined.
    if (tp[c] == 0) continue;
    sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(pred_count[c] + true_count[c]);
  }
  return sum / static_cast<double>(classes);
}

FoldScores fold_summary(std::span<const double> scores, std::string method) {
  const auto k = scores.size();
  if (k < 2) throw InputError(fmt::format("fold summary needs k >= 2, got {}", k));
  FoldScores out;
  out.method = std::move(method);
  out.folds.assign(scores.begin(), scores.end());
  out.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(k);
  double ss = 0.0;
  const bool constant = std::all_of(scores.begin(), scores.end(), [&](double v) { return v == scores[0]; });
  if (constant) out.mean = scores[0];  // summation can drift off the shared value
  else
    for (const double v : scores) ss += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(ss / static_cast<double>(k - 1));
  out.half_width = t_critical(0.05, k - 1) * out.stddev / std::sqrt(static_cast<double>(k));
  return out;
}

namespace {
// Two-sided critical values, df = 1..30.
constexpr std::array<double, 30> kT10 = {6.314, 2.920, 2.353, 2.132, 2.015, 1.943, 1.895, 1.860, 1.833, 1.812,
                                         1.796, 1.782, 1.771, 1.761, 1.753, 1.746, 1.740, 1.734, 1.729, 1.725,
                                         1.721, 1.717, 1.714, 1.711, 1.708, 1.706, 1.703, 1.701, 1.699, 1.697};
constexpr std::array<double, 30> kT05 = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                         2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
                                         2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
constexpr std::array<double, 30> kT01 = {63.657, 9.925, 5.841, 4.604, 4.032, 3.707, 3.499, 3.355, 3.250, 3.169,
                                         3.106,  3.055, 3.012, 2.977, 2.947, 2.921, 2.898, 2.878, 2.861, 2.845,
                                         2.831,  2.819, 2.807, 2.797, 2.787, 2.779, 2.771, 2.763, 2.756, 2.750};
}  // namespace

double t_critical(double alpha, std::size_t df) {
  if (df == 0) throw InputError("t critical value needs df >= 1");
  const std::array<double, 30>* table = nullptr;
  double z = 0.0;
  if (std::abs(alpha - 0.10) < 1e-12) {
    table = &kT10;
    z = 1.645;
  } else if (std::abs(alpha - 0.05) < 1e-12) {
    table = &kT05;
    z = 1.960;
  } else if (std::abs(alpha - 0.01) < 1e-12) {
    table = &kT01;
    z = 2.576;
  } else {
    throw InputError(fmt::format("unsupported significance level {} (use 0.10, 0.05 or 0.01)", alpha));
  }
  return df <= table->size() ? (*table)[df - 1] : z;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::a_better: return "A_BETTER";
    case Verdict::tie: return "TIE";
    case Verdict::b_better: return "B_BETTER";
  }
  return "?";
}

PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() != b.size()) throw InputError(fmt::format("paired t-test: {} vs {} values", a.size(), b.size()));
  const auto k = a.size();
  if (k < 2) throw InputError("paired t-test needs at least two pairs");
  std::vector<double> d(k);
  for (std::size_t i = 0; i < k; ++i) d[i] = a[i] - b[i];
  PairedTTest out;
  out.mean_diff = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(k);
  double ss = 0.0;
  for (const double v : d) ss += (v - out.mean_diff) * (v - out.mean_diff);
  out.sd_diff = std::sqrt(ss / static_cast<double>(k - 1));

  // Differences constant up to rounding: zero variance, so t is 0 or
  // +/-inf by the sign of the mean.
  if (out.sd_diff <= 1e-12 * std::abs(out.mean_diff) || out.sd_diff == 0.0) {
    out.sd_diff = 0.0;
    if (out.mean_diff == 0.0) return out;
    out.t = out.mean_diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    out.verdict = out.mean_diff > 0 ? Verdict::a_better : Verdict::b_better;
    return out;
  }
  out.t = out.mean_diff / (out.sd_diff / std::sqrt(static_cast<double>(k)));
  const double crit = t_critical(alpha, k - 1);
  if (std::abs(out.t) <= crit) {
    out.verdict = Verdict::tie;
  } else {
    out.verdict = out.t > 0 ? Verdict::a_better : Verdict::b_better;
  }
  return out;
}

}  // namespace cascade
