#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rater_equiv/agreement.hpp"
#include "rater_equiv/error.hpp"
#include "rater_equiv/hypothesis.hpp"

namespace rater_equiv {

struct GateConfig {
  double tolerance = 0.20;
  double tost_margin = 1.0;
  double alpha = 0.05;
  // Bonferroni family size; 0 means "number of Wilcoxon comparisons in the batch".
  std::size_t bonferroni_m = 0;

  void validate() const {
    if (!(tolerance > 0.0 && tolerance < 1.0)) throw Error(ErrorCode::kParameter, "gate tolerance must lie in (0,1)");
    if (!(tost_margin > 0.0)) throw Error(ErrorCode::kParameter, "TOST margin must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::kParameter, "alpha must lie in (0,1)");
  }
};

// The full per-row statistic tuple of a comparison table.
struct PairStats {
  AgreementSummary agreement;
  TostResult tost;
  double wilcoxon_p_corrected = 1.0;
  double jaccard_auc = 0.0;

  double sd_band() const { return agreement.bland_altman.half_width(); }
};

enum class Criterion { kKappa, kIcc, kMae, kBaBias, kBaLoa, kTost, kWilcoxon, kSpearman, kJaccardAuc };

inline constexpr std::size_t kCriterionCount = 9;

inline constexpr std::array<Criterion, kCriterionCount> kAllCriteria{
    Criterion::kKappa, Criterion::kIcc,      Criterion::kMae,      Criterion::kBaBias,    Criterion::kBaLoa,
    Criterion::kTost,  Criterion::kWilcoxon, Criterion::kSpearman, Criterion::kJaccardAuc};

constexpr std::string_view criterion_name(Criterion c) {
  switch (c) {
    case Criterion::kKappa: return "kappa";
    case Criterion::kIcc: return "icc";
    case Criterion::kMae: return "mae";
    case Criterion::kBaBias: return "ba_bias";
    case Criterion::kBaLoa: return "ba_loa";
    case Criterion::kTost: return "tost";
    case Criterion::kWilcoxon: return "wilcoxon";
    case Criterion::kSpearman: return "spearman";
    case Criterion::kJaccardAuc: return "jaccard_auc";
  }
  return "?";
}

struct GateReport {
  std::array<bool, kCriterionCount> flags{};
  int passed = 0;
  PairStats baseline;
  std::vector<std::string> warnings;

  bool flag(Criterion c) const { return flags[static_cast<std::size_t>(c)]; }
};

struct RunAggregate {
  std::vector<GateReport> reports;
  double mean_passed = 0.0;
};

namespace detail {

// Inclusive comparisons; the slack only absorbs binary rounding of t * baseline.
inline constexpr double kGateSlack = 1e-12;

inline bool at_least(double value, double bound) { return value >= bound - kGateSlack; }
inline bool at_most(double value, double bound) { return value <= bound + kGateSlack; }

inline double require_defined(std::optional<double> value, Criterion c) {
  if (!value || !std::isfinite(*value)) {
    throw Error(ErrorCode::kGate, "baseline statistic for criterion '" + std::string(criterion_name(c)) +
                                      "' is undefined");
  }
  return *value;
}

}  // namespace detail

inline GateReport evaluate_gate(const PairStats& candidate, const PairStats& baseline, const GateConfig& config) {
  config.validate();
  const double t = config.tolerance;
  GateReport report;
  report.baseline = baseline;

  auto set = [&](Criterion c, bool value) { report.flags[static_cast<std::size_t>(c)] = value; };

  // Higher-is-better statistics: candidate >= (1 - t) * baseline.
  auto lower_bounded = [&](Criterion c, std::optional<double> cand, std::optional<double> base) {
    const double b = detail::require_defined(base, c);
    if (b <= 0.0) {
      report.warnings.push_back("criterion '" + std::string(criterion_name(c)) +
                                "' has a non-positive baseline; flag passes vacuously");
      set(c, true);
      return;
    }
    set(c, cand && std::isfinite(*cand) && detail::at_least(*cand, (1.0 - t) * b));
  };

  const auto& ca = candidate.agreement;
  const auto& ba = baseline.agreement;
  lower_bounded(Criterion::kKappa, ca.kappa, ba.kappa);
  lower_bounded(Criterion::kIcc, ca.icc, ba.icc);

  const double base_mae = detail::require_defined(ba.mae, Criterion::kMae);
  set(Criterion::kMae, detail::at_most(ca.mae, (1.0 + t) * base_mae));

  const double base_bias = detail::require_defined(ba.bland_altman.bias, Criterion::kBaBias);
  set(Criterion::kBaBias, detail::at_most(std::abs(ca.bland_altman.bias), (1.0 + t) * std::abs(base_bias)));

  const double base_band = detail::require_defined(baseline.sd_band(), Criterion::kBaLoa);
  const double band = candidate.sd_band();
  set(Criterion::kBaLoa, detail::at_least(band, (1.0 - t) * base_band) && detail::at_most(band, (1.0 + t) * base_band));

  set(Criterion::kTost, candidate.tost.equivalent);
  set(Criterion::kWilcoxon, candidate.wilcoxon_p_corrected > config.alpha);

  lower_bounded(Criterion::kSpearman, ca.spearman_rho, ba.spearman_rho);
  lower_bounded(Criterion::kJaccardAuc, candidate.jaccard_auc, baseline.jaccard_auc);

  for (bool f : report.flags) report.passed += f ? 1 : 0;
  return report;
}

inline RunAggregate aggregate_runs(std::vector<GateReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::kParameter, "cannot aggregate an empty list of gate reports");
  RunAggregate out;
  double total = 0.0;
  for (const auto& r : reports) total += r.passed;
  out.mean_passed = total / static_cast<double>(reports.size());
  out.reports = std::move(reports);
  return out;
}

}  // namespace rater_equiv
