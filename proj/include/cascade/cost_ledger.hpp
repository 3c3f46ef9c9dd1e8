#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace cascade {

enum class Phase { representation, classifier_training, threshold_tuning, llm_prompting, prediction };

inline constexpr Phase kAllPhases[] = {Phase::representation, Phase::classifier_training, Phase::threshold_tuning,
                                       Phase::llm_prompting, Phase::prediction};

std::string_view to_string(Phase phase);

struct PhaseTiming {
  Phase phase;
  double seconds = 0.0;
  std::uint32_t fold = 0;
};

/// Append-only record of phase durations. One record per (phase, fold);
/// negative durations and duplicates are rejected. Safe to append from
/// several threads.
class CostLedger {
 public:
  CostLedger() = default;
  CostLedger(const CostLedger& other);
  CostLedger& operator=(const CostLedger& other);

  void record(Phase phase, std::uint32_t fold, double seconds);
  std::vector<PhaseTiming> timings() const;

 private:
  mutable std::mutex mutex_;
  std::vector<PhaseTiming> timings_;
};

struct TimeTotals {
  std::map<std::uint32_t, double> per_fold;
  double total = 0.0;
};

/// Sums phases per fold; the grand total is the sum over folds.
TimeTotals total_time(const std::vector<PhaseTiming>& timings);

/// Converts aggregate GPU time into dollars and kg CO2. The power and carbon
/// intensity defaults are back-fitted estimates (Tesla P100 TDP, 0.112 kg/kWh).
struct CostModel {
  double gpu_power_kw = 0.250;
  double carbon_intensity = 0.112;  // kg CO2 per kWh
  double pue = 1.0;
  double dollars_per_hour = 0.752;
  std::uint32_t folds = 5;

  void validate() const;
};

/// (seconds / 3600) * dollars_per_hour, unrounded.
double dollars(double total_seconds_all_folds, const CostModel& model);

/// (seconds / 3600) * kW * PUE * kg/kWh.
double co2_kg(double total_seconds_all_folds, const CostModel& model);

/// Per-fold seconds scaled by the model's fold count.
double all_folds_seconds(double per_fold_seconds, const CostModel& model);

/// Dollars rounded half-away-from-zero to cents, e.g. "61.56".
std::string format_dollars(double value);

/// Kilograms truncated toward zero at `decimals` places, trailing zeros
/// dropped (the convention of published CO2 tables: 0.00848 -> "0.008").
std::string format_kg(double value, int decimals = 3);

enum class TimingMode { measured, simulated };

std::string_view to_string(TimingMode mode);
TimingMode timing_mode_from_string(std::string_view name);

/// Work done inside a phase, used to charge simulated time.
struct Work {
  double documents_embedded = 0;
  double training_row_iterations = 0;
  double predictions = 0;
  double llm_calls = 0;
};

/// Per-unit costs for simulated timing. Simulated runs are reproducible
/// byte-for-byte, which wall-clock measurements cannot be.
struct SimulatedRates {
  double seconds_per_document_embedded = 0.01;
  double seconds_per_training_row_iteration = 1e-6;
  double seconds_per_prediction = 1e-4;
  double seconds_per_llm_call = 0.5;

  double charge(const Work& w) const;
};

/// Times a phase either with the steady clock or from its reported work.
class PhaseClock {
 public:
  explicit PhaseClock(TimingMode mode = TimingMode::measured, SimulatedRates rates = {})
      : mode_(mode), rates_(rates) {}

  TimingMode mode() const { return mode_; }

  /// Runs `fn` (which returns the Work it performed) and returns seconds.
  template <class Fn>
  double run(Fn&& fn) const {
    const auto start = std::chrono::steady_clock::now();
    const Work work = fn();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return mode_ == TimingMode::measured ? wall : rates_.charge(work);
  }

  /// Converts an externally measured duration plus its work.
  double charge(double measured_seconds, const Work& work) const {
    return mode_ == TimingMode::measured ? measured_seconds : rates_.charge(work);
  }

 private:
  TimingMode mode_;
  SimulatedRates rates_;
};

}  // namespace cascade
