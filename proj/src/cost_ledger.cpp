#include "cascade/cost_ledger.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "cascade/errors.hpp"

namespace cascade {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::representation: return "representation";
    case Phase::classifier_training: return "classifier_training";
    case Phase::threshold_tuning: return "threshold_tuning";
    case Phase::llm_prompting: return "llm_prompting";
    case Phase::prediction: return "prediction";
  }
  return "?";
}

CostLedger::CostLedger(const CostLedger& other) : timings_(other.timings()) {}

CostLedger& CostLedger::operator=(const CostLedger& other) {
  if (this != &other) {
    auto copy = other.timings();
    std::lock_guard lock(mutex_);
    timings_ = std::move(copy);
  }
  return *this;
}

void CostLedger::record(Phase phase, std::uint32_t fold, double seconds) {
  if (!(seconds >= 0.0) || !std::isfinite(seconds)) {
    throw InputError(fmt::format("invalid duration {} for phase {} fold {}", seconds, to_string(phase), fold));
  }
  std::lock_guard lock(mutex_);
  const bool dup = std::any_of(timings_.begin(), timings_.end(),
                               [&](const PhaseTiming& t) { return t.phase == phase && t.fold == fold; });
  if (dup) throw InputError(fmt::format("phase {} already recorded for fold {}", to_string(phase), fold));
  timings_.push_back({phase, seconds, fold});
}

std::vector<PhaseTiming> CostLedger::timings() const {
  std::lock_guard lock(mutex_);
  return timings_;
}

TimeTotals total_time(const std::vector<PhaseTiming>& timings) {
  TimeTotals out;
  for (const auto& t : timings) {
    if (t.seconds < 0.0) throw InputError("negative phase duration");
    out.per_fold[t.fold] += t.seconds;
  }
  for (const auto& [fold, s] : out.per_fold) out.total += s;
  return out;
}

void CostModel::validate() const {
  if (!(gpu_power_kw > 0) || !(carbon_intensity > 0) || !(pue > 0) || !(dollars_per_hour > 0) || folds == 0) {
    throw InputError("cost model fields must all be positive");
  }
}

double dollars(double total_seconds_all_folds, const CostModel& model) {
  return total_seconds_all_folds / 3600.0 * model.dollars_per_hour;
}

double co2_kg(double total_seconds_all_folds, const CostModel& model) {
  return total_seconds_all_folds / 3600.0 * model.gpu_power_kw * model.pue * model.carbon_intensity;
}

double all_folds_seconds(double per_fold_seconds, const CostModel& model) {
  return per_fold_seconds * static_cast<double>(model.folds);
}

std::string format_dollars(double value) { return fmt::format("{:.2f}", std::round(value * 100.0) / 100.0); }

std::string format_kg(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // Nudge by a relative epsilon so exact decimal values (0.1) do not truncate down.
  const double truncated = std::trunc(value * scale * (1.0 + 1e-12)) / scale;
  auto s = fmt::format("{:.{}f}", truncated, decimals);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  return s;
}

std::string_view to_string(TimingMode mode) { return mode == TimingMode::measured ? "measured" : "simulated"; }

TimingMode timing_mode_from_string(std::string_view name) {
  if (name == "measured") return TimingMode::measured;
  if (name == "simulated") return TimingMode::simulated;
  throw InputError(fmt::format("unknown timing mode '{}' (expected measured or simulated)", name));
}

double SimulatedRates::charge(const Work& w) const {
  return w.documents_embedded * seconds_per_document_embedded +
         w.training_row_iterations * seconds_per_training_row_iteration + w.predictions * seconds_per_prediction +
         w.llm_calls * seconds_per_llm_call;
}

}  // namespace cascade
