#include <doctest.h>

#include <thread>

#include "cascade/cost_ledger.hpp"
#include "cascade/errors.hpp"

using namespace cascade;

TEST_CASE("phase totals") {
  CostLedger ledger;
  ledger.record(Phase::representation, 0, 10);
  ledger.record(Phase::classifier_training, 0, 5);
  ledger.record(Phase::threshold_tuning, 0, 1);
  ledger.record(Phase::llm_prompting, 0, 20);
  ledger.record(Phase::prediction, 0, 4);
  const auto t = total_time(ledger.timings());
  CHECK(t.per_fold.at(0) == 40.0);
  CHECK(t.total == 40.0);
  CHECK(total_time({}).total == 0.0);
}

TEST_CASE("five folds of 78 s") {
  CostLedger ledger;
  for (std::uint32_t f = 0; f < 5; ++f) ledger.record(Phase::classifier_training, f, 78);
  const auto t = total_time(ledger.timings());
  CHECK(t.per_fold.size() == 5);
  CHECK(t.total == 390.0);
}

TEST_CASE("ledger rejects bad records") {
  CostLedger ledger;
  CHECK_THROWS_AS(ledger.record(Phase::prediction, 0, -1.0), InputError);
  ledger.record(Phase::prediction, 0, 1.0);
  CHECK_THROWS_AS(ledger.record(Phase::prediction, 0, 2.0), InputError);
  CHECK_NOTHROW(ledger.record(Phase::prediction, 1, 2.0));
  const CostLedger copy = ledger;
  CHECK(copy.timings().size() == 2);
}

TEST_CASE("concurrent records are all kept") {
  CostLedger ledger;
  {
    std::vector<std::jthread> threads;
    for (std::uint32_t f = 0; f < 8; ++f) {
      threads.emplace_back([&ledger, f] {
        for (const auto p : kAllPhases) ledger.record(p, f, 1.0);
      });
    }
  }
  CHECK(ledger.timings().size() == 40);
  CHECK(total_time(ledger.timings()).total == 40.0);
}

TEST_CASE("dollars") {
  const CostModel m;
  CHECK(format_dollars(dollars(1194.0 * 5, m)) == "1.25");
  CHECK(format_dollars(dollars(58944.0 * 5, m)) == "61.56");
  CHECK(format_dollars(dollars(0.0, m)) == "0.00");
  CHECK(dollars(3600.0, m) == doctest::Approx(0.752));
  CHECK(all_folds_seconds(78.0, m) == 390.0);
}

TEST_CASE("carbon") {
  const CostModel m;
  CHECK(co2_kg(390.0, m) == doctest::Approx(0.250 * 0.112 * 390.0 / 3600.0));
  CHECK(co2_kg(390.0, m) == doctest::Approx(0.00303).epsilon(1e-3));
  CHECK(format_kg(co2_kg(390.0, m)) == "0.003");
  CHECK(co2_kg(2619.0 * 5, m) == doctest::Approx(0.10185).epsilon(1e-4));
  CHECK(format_kg(co2_kg(2619.0 * 5, m)) == "0.101");
  CHECK(co2_kg(0.0, m) == 0.0);
  CHECK(format_kg(0.0) == "0");
  CHECK(format_kg(0.02) == "0.02");
  CHECK(format_kg(0.00848) == "0.008");
  CostModel dirty = m;
  dirty.pue = 1.5;
  CHECK(co2_kg(3600.0, dirty) == doctest::Approx(0.250 * 1.5 * 0.112));
}

TEST_CASE("cost model validation") {
  CostModel m;
  m.dollars_per_hour = -1;
  CHECK_THROWS_AS(m.validate(), InputError);
  CostModel z;
  z.folds = 0;
  CHECK_THROWS_AS(z.validate(), InputError);
}

TEST_CASE("phase clocks") {
  const SimulatedRates rates;
  const Work w{.documents_embedded = 10, .training_row_iterations = 1e6, .predictions = 100, .llm_calls = 4};
  CHECK(rates.charge(w) == doctest::Approx(0.1 + 1.0 + 0.01 + 2.0));

  const PhaseClock sim(TimingMode::simulated, rates);
  CHECK(sim.run([] {
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    return Work{.llm_calls = 2};
  }) == 1.0);
  CHECK(sim.charge(123.0, Work{.predictions = 10}) == doctest::Approx(1e-3));

  const PhaseClock wall(TimingMode::measured, rates);
  const double s = wall.run([] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    return Work{.llm_calls = 1000};
  });
  CHECK(s >= 0.015);
  CHECK(s < 5.0);
  CHECK(wall.charge(7.0, Work{}) == 7.0);
  CHECK(timing_mode_from_string("simulated") == TimingMode::simulated);
  CHECK_THROWS_AS(timing_mode_from_string("fast"), InputError);
}
