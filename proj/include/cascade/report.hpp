#pragma once

#include <filesystem>
#include <string>

#include "cascade/cost_ledger.hpp"
#include "cascade/pipeline.hpp"

namespace cascade {

/// method,fold0..fold{k-1},mean,half_width (Macro-F1 as fractions).
std::string effectiveness_csv(const EvaluationResults& r);

/// Aligned table, Macro-F1 in percent as "mean±hw". `*` marks the best mean
/// and every method statistically tied with it (paired t-test, 95%).
std::string effectiveness_text(const EvaluationResults& r);

/// method_a,method_b,mean_diff,t,verdict for every ordered pair.
std::string ttest_csv(const EvaluationResults& r);

/// Per-fold cascade routing audit plus a mean row.
std::string audit_csv(const EvaluationResults& r);
std::string audit_text(const EvaluationResults& r);

std::string tuning_csv(const EvaluationResults& r);
std::string calibration_csv(const EvaluationResults& r);

/// method,phase,fold,seconds for every ledger record.
std::string timings_csv(const EvaluationResults& r);

/// dataset,method,fold0..,total_seconds,dollars,kg_co2. Dollars and CO2 use
/// the total over all evaluated folds.
std::string cost_csv(const EvaluationResults& r, const CostModel& model);

/// Time per fold (mean±sd), dollars and CO2 per method.
std::string cost_text(const EvaluationResults& r, const CostModel& model);

/// Writes every table above plus results.json into `dir`.
void write_report_bundle(const EvaluationResults& r, const CostModel& model, const std::filesystem::path& dir);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace cascade
