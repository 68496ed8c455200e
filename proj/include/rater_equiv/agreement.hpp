#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "rater_equiv/error.hpp"
#include "rater_equiv/ratings.hpp"

namespace rater_equiv {

inline constexpr double kLoaZ = 1.96;

struct BlandAltmanResult {
  double bias = 0.0;  // mean of (reference - candidate)
  double sd = 0.0;    // sample SD of the differences
  double loa_low = 0.0;
  double loa_high = 0.0;

  double half_width() const { return kLoaZ * sd; }
};

struct IccResult {
  double value = 0.0;
  bool degenerate = false;  // zero total variance, value fixed at 1
};

struct AgreementSummary {
  double kappa = 0.0;
  double icc = 0.0;
  double mae = 0.0;
  std::optional<double> spearman_rho;  // empty when a vector is constant
  BlandAltmanResult bland_altman;
};

namespace detail {

inline void require_size(const PairedRatings& pair, std::size_t min_n, const char* what) {
  pair.validate();
  if (pair.size() < min_n) {
    throw Error(ErrorCode::kInsufficientData, std::string(what) + " needs at least " + std::to_string(min_n) +
                                                  " paired ratings, got " + std::to_string(pair.size()));
  }
}

}  // namespace detail

// Average ranks (1-based), ties share the mean of the positions they span.
template <typename T>
std::vector<double> mid_ranks(std::span<const T> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return values[l] < values[r]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Quadratic-weighted Cohen's kappa over the full declared scale.
inline double quadratic_weighted_kappa(const PairedRatings& pair) {
  detail::require_size(pair, 2, "weighted kappa");
  const int k = pair.scale.size();
  const double n = static_cast<double>(pair.size());
  std::vector<double> observed(static_cast<std::size_t>(k * k), 0.0);
  std::vector<double> row(static_cast<std::size_t>(k), 0.0), col(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < pair.size(); ++i) {
    const int r = pair.a[i] - pair.scale.min;
    const int c = pair.b[i] - pair.scale.min;
    observed[static_cast<std::size_t>(r * k + c)] += 1.0;
    row[static_cast<std::size_t>(r)] += 1.0;
    col[static_cast<std::size_t>(c)] += 1.0;
  }
  const double span2 = static_cast<double>((k - 1) * (k - 1));
  double po = 0.0, pe = 0.0;
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) {
      const double w = 1.0 - static_cast<double>((r - c) * (r - c)) / span2;
      po += w * observed[static_cast<std::size_t>(r * k + c)];
      pe += w * row[static_cast<std::size_t>(r)] * col[static_cast<std::size_t>(c)];
    }
  }
  po /= n;
  pe /= n * n;
  // Both raters constant on the same category.
  if (1.0 - pe <= 1e-12) return 1.0;
  return (po - pe) / (1.0 - pe);
}

// ICC(2,1): two-way random effects, absolute agreement, single rater.
inline IccResult icc_absolute_agreement(const PairedRatings& pair) {
  detail::require_size(pair, 2, "ICC");
  const std::size_t n = pair.size();
  constexpr double k = 2.0;
  const double nd = static_cast<double>(n);
  double grand = 0.0, mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += pair.a[i];
    mean_b += pair.b[i];
  }
  grand = (mean_a + mean_b) / (k * nd);
  mean_a /= nd;
  mean_b /= nd;

  double ss_rows = 0.0, ss_error = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double item_mean = 0.5 * (pair.a[i] + pair.b[i]);
    ss_rows += k * (item_mean - grand) * (item_mean - grand);
    const double ea = pair.a[i] - item_mean - mean_a + grand;
    const double eb = pair.b[i] - item_mean - mean_b + grand;
    ss_error += ea * ea + eb * eb;
  }
  const double ss_cols = nd * ((mean_a - grand) * (mean_a - grand) + (mean_b - grand) * (mean_b - grand));

  if (ss_rows + ss_cols + ss_error <= 0.0) return {1.0, true};

  const double ms_rows = ss_rows / (nd - 1.0);
  const double ms_cols = ss_cols / (k - 1.0);
  const double ms_error = ss_error / ((nd - 1.0) * (k - 1.0));
  const double denom = ms_rows + (k - 1.0) * ms_error + k * (ms_cols - ms_error) / nd;
  return {(ms_rows - ms_error) / denom, false};
}

inline double mean_absolute_error(const PairedRatings& pair) {
  detail::require_size(pair, 1, "MAE");
  double total = 0.0;
  for (std::size_t i = 0; i < pair.size(); ++i) total += std::abs(pair.a[i] - pair.b[i]);
  return total / static_cast<double>(pair.size());
}

inline double spearman_rho(const PairedRatings& pair) {
  detail::require_size(pair, 2, "Spearman correlation");
  auto constant = [](const std::vector<int>& v) {
    return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
  };
  if (constant(pair.a) || constant(pair.b)) {
    throw Error(ErrorCode::kUndefined, "Spearman correlation is undefined for a constant rating vector");
  }
  auto ra = mid_ranks(std::span<const int>(pair.a));
  auto rb = mid_ranks(std::span<const int>(pair.b));
  return std::clamp(pearson(ra, rb), -1.0, 1.0);
}

inline BlandAltmanResult bland_altman(const PairedRatings& pair) {
  detail::require_size(pair, 2, "Bland-Altman analysis");
  const double n = static_cast<double>(pair.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < pair.size(); ++i) mean += pair.b[i] - pair.a[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < pair.size(); ++i) {
    const double d = pair.b[i] - pair.a[i] - mean;
    ss += d * d;
  }
  BlandAltmanResult out;
  out.bias = mean;
  out.sd = std::sqrt(ss / (n - 1.0));
  out.loa_low = mean - kLoaZ * out.sd;
  out.loa_high = mean + kLoaZ * out.sd;
  return out;
}

inline AgreementSummary summarize_agreement(const PairedRatings& pair) {
  AgreementSummary s;
  s.kappa = quadratic_weighted_kappa(pair);
  s.icc = icc_absolute_agreement(pair).value;
  s.mae = mean_absolute_error(pair);
  try {
    s.spearman_rho = spearman_rho(pair);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUndefined) throw;
  }
  s.bland_altman = bland_altman(pair);
  return s;
}

}  // namespace rater_equiv
