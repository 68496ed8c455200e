#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rater_equiv/error.hpp"
#include "rater_equiv/ratings.hpp"

namespace rater_equiv {

struct TopSet {
  ItemSet items;
  int boundary_rating = 0;
  double nominal_fraction = 0.0;
  double actual_fraction = 0.0;
};

struct CurvePoint {
  double nominal_fraction = 0.0;
  double actual_fraction = 0.0;
  double jaccard = 0.0;
};

struct JaccardCurve {
  std::vector<CurvePoint> points;
  double auc = 0.0;
};

enum class ReferenceSide { kA, kB };

// 0.05, 0.10, ..., 1.00 computed as k/20 so the grid has no accumulated drift.
inline std::vector<double> default_fraction_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 20; ++k) grid.push_back(k / 20.0);
  return grid;
}

// Smallest rating-threshold set holding at least n_target items; every item
// tied with the n_target-th best is absorbed.
inline TopSet tie_inclusive_top_set(const std::map<std::string, int>& ratings, std::size_t n_target) {
  if (n_target < 1 || n_target > ratings.size()) {
    throw Error(ErrorCode::kParameter, "top-set target " + std::to_string(n_target) + " outside [1, " +
                                           std::to_string(ratings.size()) + "]");
  }
  std::vector<int> values;
  values.reserve(ratings.size());
  for (const auto& [item, rating] : ratings) values.push_back(rating);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(n_target - 1), values.end(),
                   std::greater<>());
  TopSet top;
  top.boundary_rating = values[n_target - 1];
  for (const auto& [item, rating] : ratings) {
    if (rating >= top.boundary_rating) top.items.insert(item);
  }
  top.actual_fraction = static_cast<double>(top.items.size()) / static_cast<double>(ratings.size());
  return top;
}

inline double jaccard(const ItemSet& a, const ItemSet& b) {
  std::size_t common = 0;
  for (const auto& item : a) common += b.count(item);
  const std::size_t united = a.size() + b.size() - common;
  if (united == 0) throw Error(ErrorCode::kUndefined, "Jaccard similarity of two empty sets");
  return static_cast<double>(common) / static_cast<double>(united);
}

// Trapezoidal area from the first point to x = 1, normalised by that x-range.
inline double curve_auc(const std::vector<CurvePoint>& points) {
  if (points.size() < 2) throw Error(ErrorCode::kInsufficientData, "curve AUC needs at least 2 points");
  // The range is accumulated from the same dx terms so a constant curve
  // integrates to exactly its value.
  double area = 0.0, range = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double dx = points[i].actual_fraction - points[i - 1].actual_fraction;
    area += 0.5 * dx * (points[i].jaccard + points[i - 1].jaccard);
    range += dx;
  }
  if (range <= 0.0) throw Error(ErrorCode::kInsufficientData, "curve AUC needs a non-empty x-range");
  return area / range;
}

inline double curve_auc(const JaccardCurve& curve) { return curve_auc(curve.points); }

// ceil(f * total) tolerant of binary representation error in f * total.
inline std::size_t nominal_count(double fraction, std::size_t total) {
  const double raw = fraction * static_cast<double>(total);
  auto n = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(n, 1, total);
}

inline JaccardCurve jaccard_curve(const PairedRatings& pair, ReferenceSide reference,
                                  const std::vector<double>& fractions) {
  pair.validate();
  if (pair.size() == 0) throw Error(ErrorCode::kInsufficientData, "Jaccard curve needs a non-empty pair");
  if (pair.item_ids.size() != pair.size()) throw Error(ErrorCode::kShape, "Jaccard curve needs item ids");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw Error(ErrorCode::kParameter, "nominal fraction outside (0,1]");
  }
  std::map<std::string, int> expert, candidate;
  const auto& ref = reference == ReferenceSide::kA ? pair.a : pair.b;
  const auto& other = reference == ReferenceSide::kA ? pair.b : pair.a;
  for (std::size_t i = 0; i < pair.size(); ++i) {
    if (!expert.emplace(pair.item_ids[i], ref[i]).second) {
      throw Error(ErrorCode::kConflict, "duplicate item '" + pair.item_ids[i] + "' in pair");
    }
    candidate.emplace(pair.item_ids[i], other[i]);
  }
  const std::size_t total = pair.size();

  std::vector<CurvePoint> raw;
  for (double f : fractions) {
    auto e_top = tie_inclusive_top_set(expert, nominal_count(f, total));
    auto m_top = tie_inclusive_top_set(candidate, e_top.items.size());
    raw.push_back({f, e_top.actual_fraction, jaccard(e_top.items, m_top.items)});
  }
  std::stable_sort(raw.begin(), raw.end(),
                   [](const CurvePoint& l, const CurvePoint& r) { return l.actual_fraction < r.actual_fraction; });
  JaccardCurve curve;
  for (const auto& p : raw) {
    if (!curve.points.empty() && curve.points.back().actual_fraction == p.actual_fraction) {
      curve.points.back() = p;
    } else {
      curve.points.push_back(p);
    }
  }
  if (curve.points.empty() || curve.points.back().actual_fraction != 1.0) {
    curve.points.push_back({1.0, 1.0, 1.0});
  }
  curve.auc = curve_auc(curve.points);
  return curve;
}

}  // namespace rater_equiv
