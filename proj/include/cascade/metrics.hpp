#pragma once

#include <span>
#include <string>
#include <vector>

#include "cascade/corpus.hpp"

namespace cascade {

/// Mean over all `classes` of per-class F1. A class whose precision or
/// recall is undefined, or whose P+R is zero, contributes 0; classes absent
/// from both inputs still count in the denominator.
double macro_f1(std::span<const ClassIndex> y_true, std::span<const ClassIndex> y_pred, std::size_t classes);

struct FoldScores {
  std::string method;
  std::vector<double> folds;
  double mean = 0.0;
  double stddev = 0.0;      // sample (n-1) standard deviation
  double half_width = 0.0;  // t_{0.975,k-1} * s / sqrt(k)
};

FoldScores fold_summary(std::span<const double> scores, std::string method = {});

/// Two-sided Student t critical value for significance `alpha`
/// (0.10, 0.05 or 0.01). Table for df 1..30, normal quantile beyond.
double t_critical(double alpha, std::size_t df);

enum class Verdict { a_better, tie, b_better };

std::string_view to_string(Verdict v);

struct PairedTTest {
  Verdict verdict = Verdict::tie;
  double t = 0.0;  // +/-infinity when all differences equal a nonzero constant
  double mean_diff = 0.0;
  double sd_diff = 0.0;
};

/// Paired t-test on d = a - b. |t| <= critical -> tie, else the sign of mean(d).
PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

}  // namespace cascade
