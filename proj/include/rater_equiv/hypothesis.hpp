#pragma once

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "rater_equiv/agreement.hpp"
#include "rater_equiv/error.hpp"
#include "rater_equiv/ratings.hpp"

namespace rater_equiv {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string method;
  std::size_t zeros_dropped = 0;
};

struct TostResult {
  double margin = 1.0;
  double alpha = 0.05;
  double mean_diff = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
  double t_lower = 0.0;
  double t_upper = 0.0;
  double p_lower = 1.0;
  double p_upper = 1.0;
  double p_value = 1.0;  // max(p_lower, p_upper)
  bool equivalent = false;
};

inline constexpr std::size_t kWilcoxonExactLimit = 25;

namespace detail {

inline double chi_squared_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(dof), x));
}

inline double normal_sf(double z) {
  return boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), z));
}

inline double students_t_sf(double t, double dof) {
  return boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(dof), t));
}

// Number of sign assignments over ranks 1..m giving each positive-rank sum.
inline std::vector<double> signed_rank_counts(std::size_t m) {
  const std::size_t max_sum = m * (m + 1) / 2;
  std::vector<double> counts(max_sum + 1, 0.0);
  counts[0] = 1.0;
  std::size_t reach = 0;
  for (std::size_t rank = 1; rank <= m; ++rank) {
    reach += rank;
    for (std::size_t s = reach; s >= rank; --s) counts[s] += counts[s - rank];
  }
  return counts;
}

}  // namespace detail

// Friedman omnibus over k aligned rating columns (one per rater).
template <typename T>
TestResult friedman_test(const std::vector<std::vector<T>>& columns) {
  const std::size_t k = columns.size();
  if (k < 2) throw Error(ErrorCode::kInsufficientData, "Friedman test needs at least 2 raters");
  const std::size_t n = columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != n) throw Error(ErrorCode::kShape, "Friedman columns differ in length");
  }
  if (n < 2) throw Error(ErrorCode::kInsufficientData, "Friedman test needs at least 2 items");

  std::vector<double> rank_sums(k, 0.0);
  double tie_sum = 0.0;
  std::vector<T> row(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) row[j] = columns[j][i];
    auto ranks = mid_ranks(std::span<const T>(row));
    for (std::size_t j = 0; j < k; ++j) rank_sums[j] += ranks[j];
    std::vector<T> sorted = row;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t s = 0; s < k;) {
      std::size_t e = s;
      while (e + 1 < k && sorted[e + 1] == sorted[s]) ++e;
      const double t = static_cast<double>(e - s + 1);
      tie_sum += t * t * t - t;
      s = e + 1;
    }
  }
  const double nd = static_cast<double>(n), kd = static_cast<double>(k);
  double sum_sq = 0.0;
  for (double r : rank_sums) sum_sq += r * r;
  const double q = 12.0 / (nd * kd * (kd + 1.0)) * sum_sq - 3.0 * nd * (kd + 1.0);
  const double correction = 1.0 - tie_sum / (nd * (kd * kd * kd - kd));

  TestResult result;
  result.method = "Friedman chi-square, tie-corrected, df=" + std::to_string(k - 1);
  if (correction <= 0.0) {
    // every item fully tied across raters
    result.statistic = 0.0;
    result.p_value = 1.0;
    return result;
  }
  result.statistic = std::max(0.0, q / correction);
  result.p_value = std::clamp(detail::chi_squared_sf(result.statistic, kd - 1.0), 0.0, 1.0);
  return result;
}

// Two-sided Wilcoxon signed-rank test on d = b - a. Zero differences are
// dropped. Exact null distribution when the non-zero count is at most 25 and
// |d| has no ties; otherwise the tie- and continuity-corrected normal form.
inline TestResult wilcoxon_signed_rank(const PairedRatings& pair) {
  pair.validate();
  if (pair.size() == 0) throw Error(ErrorCode::kInsufficientData, "Wilcoxon test needs at least 1 pair");

  std::vector<int> diffs;
  for (std::size_t i = 0; i < pair.size(); ++i) {
    if (int d = pair.b[i] - pair.a[i]; d != 0) diffs.push_back(d);
  }
  TestResult result;
  result.zeros_dropped = pair.size() - diffs.size();
  const std::size_t m = diffs.size();
  const std::string dropped = ", zeros dropped=" + std::to_string(result.zeros_dropped);
  if (m == 0) {
    result.statistic = 0.0;
    result.p_value = 1.0;
    result.method = "Wilcoxon signed-rank, all differences zero" + dropped;
    return result;
  }

  std::vector<int> magnitudes(m);
  std::transform(diffs.begin(), diffs.end(), magnitudes.begin(), [](int d) { return std::abs(d); });
  auto ranks = mid_ranks(std::span<const int>(magnitudes));
  double w_plus = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (diffs[i] > 0) w_plus += ranks[i];
  }
  const double total = static_cast<double>(m * (m + 1)) / 2.0;
  result.statistic = std::min(w_plus, total - w_plus);

  std::vector<int> sorted = magnitudes;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  bool has_ties = false;
  for (std::size_t s = 0; s < m;) {
    std::size_t e = s;
    while (e + 1 < m && sorted[e + 1] == sorted[s]) ++e;
    const double t = static_cast<double>(e - s + 1);
    if (e > s) has_ties = true;
    tie_term += t * t * t - t;
    s = e + 1;
  }

  if (m <= kWilcoxonExactLimit && !has_ties) {
    auto counts = detail::signed_rank_counts(m);
    const auto w = static_cast<std::size_t>(std::lround(w_plus));
    double lower = 0.0, upper = 0.0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      if (s <= w) lower += counts[s];
      if (s >= w) upper += counts[s];
    }
    const double denom = std::ldexp(1.0, static_cast<int>(m));
    result.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / denom);
    result.method = "Wilcoxon signed-rank, exact, m=" + std::to_string(m) + dropped;
    return result;
  }

  const double md = static_cast<double>(m);
  const double mean = md * (md + 1.0) / 4.0;
  const double var = md * (md + 1.0) * (2.0 * md + 1.0) / 24.0 - tie_term / 48.0;
  double diff = w_plus - mean;
  if (diff > 0.0) {
    diff = std::max(0.0, diff - 0.5);
  } else if (diff < 0.0) {
    diff = std::min(0.0, diff + 0.5);
  }
  const double z = diff / std::sqrt(var);
  result.p_value = std::clamp(2.0 * detail::normal_sf(std::abs(z)), 0.0, 1.0);
  result.method = "Wilcoxon signed-rank, normal approximation with tie and continuity correction, m=" +
                  std::to_string(m) + dropped;
  return result;
}

inline double bonferroni(double p, std::size_t comparisons) {
  if (comparisons == 0) throw Error(ErrorCode::kParameter, "Bonferroni family size must be positive");
  return std::min(1.0, std::clamp(p, 0.0, 1.0) * static_cast<double>(comparisons));
}

// TOST from the summary moments of the differences.
inline TostResult tost_from_moments(double mean_diff, double sd, std::size_t n, double margin, double alpha = 0.05) {
  if (!(margin > 0.0)) throw Error(ErrorCode::kParameter, "TOST margin must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::kParameter, "TOST alpha must lie in (0,1)");
  if (n < 2) throw Error(ErrorCode::kInsufficientData, "TOST needs at least 2 pairs");
  if (!(sd >= 0.0)) throw Error(ErrorCode::kParameter, "TOST standard deviation must be non-negative");
  TostResult r;
  r.margin = margin;
  r.alpha = alpha;
  r.mean_diff = mean_diff;
  r.sd = sd;
  r.n = n;
  if (r.sd == 0.0) {
    r.equivalent = std::abs(r.mean_diff) < margin;
    r.p_lower = r.p_upper = r.p_value = r.equivalent ? 0.0 : 1.0;
    return r;
  }
  const double se = r.sd / std::sqrt(static_cast<double>(r.n));
  const double dof = static_cast<double>(r.n - 1);
  r.t_lower = (r.mean_diff + margin) / se;
  r.t_upper = (margin - r.mean_diff) / se;
  r.p_lower = detail::students_t_sf(r.t_lower, dof);
  r.p_upper = detail::students_t_sf(r.t_upper, dof);
  r.p_value = std::max(r.p_lower, r.p_upper);
  r.equivalent = r.p_value < alpha;
  return r;
}

// Paired t-based two one-sided tests on d = b - a against +/- margin.
inline TostResult tost_equivalence(const PairedRatings& pair, double margin, double alpha = 0.05) {
  if (!(margin > 0.0)) throw Error(ErrorCode::kParameter, "TOST margin must be positive");
  const auto ba = bland_altman(pair);  // enforces n >= 2
  return tost_from_moments(ba.bias, ba.sd, pair.size(), margin, alpha);
}

}  // namespace rater_equiv
