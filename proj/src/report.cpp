#include "cascade/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cascade/errors.hpp"
#include "cascade/metrics.hpp"

namespace cascade {

namespace fs = std::filesystem;

namespace {

std::vector<double> scores_of(const EvaluationResults& r, Method m) {
  std::vector<double> out;
  out.reserve(r.fold_results.size());
  for (const auto& fr : r.fold_results) {
    const auto it = fr.macro_f1.find(m);
    if (it == fr.macro_f1.end()) throw EvaluationError(fmt::format("fold {} has no score for {}", fr.fold, to_string(m)));
    out.push_back(it->second);
  }
  return out;
}

std::string fold_header(const EvaluationResults& r) {
  std::string h;
  for (const auto& fr : r.fold_results) h += fmt::format(",fold{}", fr.fold);
  return h;
}

bool has_cascade(const EvaluationResults& r) {
  return std::find(r.methods.begin(), r.methods.end(), Method::cascade) != r.methods.end();
}

std::string opt_pct(const std::optional<double>& v) { return v ? fmt::format("{:.1f}", 100.0 * *v) : "NA"; }
std::string opt_frac(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : ""; }

double method_seconds(const EvaluationResults& r, Method m) {
  const auto it = r.ledgers.find(m);
  return it == r.ledgers.end() ? 0.0 : total_time(it->second.timings()).total;
}

}  // namespace

std::string effectiveness_csv(const EvaluationResults& r) {
  std::string out = "method" + fold_header(r) + ",mean,half_width\n";
  for (const auto m : r.methods) {
    const auto s = fold_summary(scores_of(r, m), std::string(to_string(m)));
    out += s.method;
    for (const auto v : s.folds) out += fmt::format(",{:.6f}", v);
    out += fmt::format(",{:.6f},{:.6f}\n", s.mean, s.half_width);
  }
  return out;
}

std::string effectiveness_text(const EvaluationResults& r) {
  std::vector<FoldScores> rows;
  for (const auto m : r.methods) rows.push_back(fold_summary(scores_of(r, m), std::string(to_string(m))));
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].mean > rows[best].mean) best = i;
  }
  std::string out = fmt::format("Macro-F1 (%), {} folds, mean±95% CI: {}\n", r.folds, r.dataset_name);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool tied = i == best || paired_t_test(rows[i].folds, rows[best].folds).verdict == Verdict::tie;
    out += fmt::format("  {:<8} {:>5.1f}±{:<4.1f}{}\n", rows[i].method, 100.0 * rows[i].mean,
                       100.0 * rows[i].half_width, tied ? " *" : "");
  }
  out += "* best mean or statistically tied with it (paired t-test, p < 0.05)\n";
  return out;
}

std::string ttest_csv(const EvaluationResults& r) {
  std::string out = "method_a,method_b,mean_diff,t,verdict\n";
  for (const auto a : r.methods) {
    for (const auto b : r.methods) {
      if (a == b) continue;
      const auto t = paired_t_test(scores_of(r, a), scores_of(r, b));
      out += fmt::format("{},{},{:.6f},{:.6f},{}\n", to_string(a), to_string(b), t.mean_diff, t.t, to_string(t.verdict));
    }
  }
  return out;
}

std::string audit_csv(const EvaluationResults& r) {
  std::string out = "fold,threshold,routed,total,pct_routed,routed_macro_f1,local_macro_f1,overall_macro_f1\n";
  if (!has_cascade(r)) return out;
  double routed = 0, total = 0, pct = 0, overall = 0;
  for (const auto& fr : r.fold_results) {
    const auto& a = fr.audit;
    out += fmt::format("{},{:.4f},{},{},{:.4f},{},{},{:.6f}\n", fr.fold, fr.threshold, a.routed, a.total, a.pct_routed,
                       opt_frac(a.routed_macro_f1), opt_frac(a.local_macro_f1), a.overall_macro_f1);
    routed += static_cast<double>(a.routed);
    total += static_cast<double>(a.total);
    pct += a.pct_routed;
    overall += a.overall_macro_f1;
  }
  const auto k = static_cast<double>(r.fold_results.size());
  out += fmt::format("mean,,{:.2f},{:.2f},{:.4f},,,{:.6f}\n", routed / k, total / k, pct / k, overall / k);
  return out;
}

std::string audit_text(const EvaluationResults& r) {
  if (!has_cascade(r)) return "cascade was not evaluated\n";
  std::string out = fmt::format("Instances sent to the LLM: {}\n", r.dataset_name);
  out += fmt::format("{:>4}  {:>9}  {:>6}  {:>6}  {:>7}  {:>13}  {:>12}\n", "fold", "threshold", "sent", "of", "pct",
                     "sent Macro-F1", "kept Macro-F1");
  for (const auto& fr : r.fold_results) {
    const auto& a = fr.audit;
    out += fmt::format("{:>4}  {:>9.0f}  {:>6}  {:>6}  {:>6.1f}%  {:>13}  {:>12}\n", fr.fold, 100.0 * fr.threshold,
                       a.routed, a.total, a.pct_routed, opt_pct(a.routed_macro_f1), opt_pct(a.local_macro_f1));
  }
  return out;
}

std::string tuning_csv(const EvaluationResults& r) {
  std::string out = "fold,threshold,macro_f1,routed,selected\n";
  for (const auto& fr : r.fold_results) {
    for (const auto& row : fr.tuning) {
      out += fmt::format("{},{:.4f},{:.6f},{},{}\n", fr.fold, row.threshold, row.macro_f1, row.routed,
                         row.threshold == fr.threshold ? 1 : 0);
    }
  }
  return out;
}

std::string calibration_csv(const EvaluationResults& r) {
  std::string out = "fold,ece,iterations,final_objective,final_grad_inf,converged\n";
  for (const auto& fr : r.fold_results) {
    out += fmt::format("{},{:.6f},{},{:.9g},{:.3g},{}\n", fr.fold, fr.ece, fr.training.iterations,
                       fr.training.final_objective, fr.training.final_grad_inf, fr.training.converged ? 1 : 0);
  }
  return out;
}

std::string timings_csv(const EvaluationResults& r) {
  std::string out = "method,phase,fold,seconds\n";
  for (const auto m : r.methods) {
    const auto it = r.ledgers.find(m);
    if (it == r.ledgers.end()) continue;
    auto timings = it->second.timings();
    std::stable_sort(timings.begin(), timings.end(), [](const PhaseTiming& a, const PhaseTiming& b) {
      return a.fold != b.fold ? a.fold < b.fold : a.phase < b.phase;
    });
    for (const auto& t : timings) out += fmt::format("{},{},{},{:.6f}\n", to_string(m), to_string(t.phase), t.fold, t.seconds);
  }
  return out;
}

std::string cost_csv(const EvaluationResults& r, const CostModel& model) {
  std::string out = "dataset,method" + fold_header(r) + ",total_seconds,dollars,kg_co2\n";
  for (const auto m : r.methods) {
    const auto it = r.ledgers.find(m);
    const auto totals = it == r.ledgers.end() ? TimeTotals{} : total_time(it->second.timings());
    out += fmt::format("{},{}", r.dataset_name, to_string(m));
    for (const auto& fr : r.fold_results) {
      const auto f = totals.per_fold.find(fr.fold);
      out += fmt::format(",{:.6f}", f == totals.per_fold.end() ? 0.0 : f->second);
    }
    out += fmt::format(",{:.6f},{},{}\n", totals.total, format_dollars(dollars(totals.total, model)),
                       format_kg(co2_kg(totals.total, model)));
  }
  return out;
}

std::string cost_text(const EvaluationResults& r, const CostModel& model) {
  std::string out = fmt::format("Cost over {} folds ({} timing): {}\n", r.fold_results.size(), to_string(r.timing),
                                r.dataset_name);
  out += fmt::format("{:<8}  {:>20}  {:>10}  {:>8}\n", "method", "seconds/fold", "dollars", "kg CO2");
  for (const auto m : r.methods) {
    const auto it = r.ledgers.find(m);
    const auto totals = it == r.ledgers.end() ? TimeTotals{} : total_time(it->second.timings());
    std::vector<double> per;
    for (const auto& [fold, s] : totals.per_fold) per.push_back(s);
    double mean = 0.0, sd = 0.0;
    if (!per.empty()) {
      for (const auto v : per) mean += v;
      mean /= static_cast<double>(per.size());
      if (per.size() > 1) {
        for (const auto v : per) sd += (v - mean) * (v - mean);
        sd = std::sqrt(sd / static_cast<double>(per.size() - 1));
      }
    }
    out += fmt::format("{:<8}  {:>20}  {:>10}  {:>8}\n", to_string(m), fmt::format("{:.2f}±{:.2f}", mean, sd),
                       "$" + format_dollars(dollars(method_seconds(r, m), model)),
                       format_kg(co2_kg(method_seconds(r, m), model)));
  }
  return out;
}

void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  out << content;
  if (!out) throw InputError(fmt::format("write to '{}' failed", path.string()));
}

void write_report_bundle(const EvaluationResults& r, const CostModel& model, const fs::path& dir) {
  fs::create_directories(dir);
  write_text_file(dir / "results.json", results_to_json(r));
  write_text_file(dir / "effectiveness.csv", effectiveness_csv(r));
  write_text_file(dir / "effectiveness.txt", effectiveness_text(r));
  write_text_file(dir / "ttest.csv", ttest_csv(r));
  write_text_file(dir / "audit.csv", audit_csv(r));
  write_text_file(dir / "audit.txt", audit_text(r));
  write_text_file(dir / "tuning.csv", tuning_csv(r));
  write_text_file(dir / "calibration.csv", calibration_csv(r));
  write_text_file(dir / "timings.csv", timings_csv(r));
  write_text_file(dir / "cost.csv", cost_csv(r, model));
  write_text_file(dir / "cost.txt", cost_text(r, model));
}

}  // namespace cascade
