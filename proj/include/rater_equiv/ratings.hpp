#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "rater_equiv/csv.hpp"
#include "rater_equiv/error.hpp"
#include "rater_equiv/random.hpp"

namespace rater_equiv {

struct RatingScale {
  int min = 1;
  int max = 6;

  bool contains(int rating) const { return rating >= min && rating <= max; }
  int size() const { return max - min + 1; }

  void validate() const {
    if (min >= max) {
      throw Error(ErrorCode::kParameter,
                  "rating scale needs min < max, got " + std::to_string(min) + ".." + std::to_string(max));
    }
  }

  friend bool operator==(const RatingScale&, const RatingScale&) = default;
};

enum class RaterRole { kExpert, kTrainedNovice, kAiJudge };

struct RatingRecord {
  std::string item_id;
  std::string rater_id;
  std::string metric;
  int rating = 0;

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

using ItemSet = std::set<std::string>;

// Items x raters x metrics grid of ordinal ratings. Absent cells are absent;
// there is no sentinel rating.
class RatingMatrix {
 public:
  explicit RatingMatrix(RatingScale scale = {}) : scale_(scale) { scale_.validate(); }

  void add(const RatingRecord& record) {
    if (!scale_.contains(record.rating)) {
      throw Error(ErrorCode::kRange, "rating " + std::to_string(record.rating) + " for item '" +
                                         record.item_id + "' outside scale " + std::to_string(scale_.min) +
                                         ".." + std::to_string(scale_.max));
    }
    auto [it, inserted] = cells_.emplace(Key{record.metric, record.rater_id, record.item_id}, record.rating);
    if (!inserted) {
      throw Error(ErrorCode::kConflict, "duplicate cell (item '" + record.item_id + "', rater '" +
                                            record.rater_id + "', metric '" + record.metric + "')");
    }
    items_.insert(record.item_id);
    metrics_.insert(record.metric);
    roles_.try_emplace(record.rater_id, default_role(record.rater_id));
  }

  void set_role(const std::string& rater_id, RaterRole role) { roles_[rater_id] = role; }

  std::optional<int> rating(const std::string& item_id, const std::string& rater_id,
                            const std::string& metric) const {
    auto it = cells_.find(Key{metric, rater_id, item_id});
    if (it == cells_.end()) return std::nullopt;
    return it->second;
  }

  // Records ordered by (metric, rater, item).
  std::vector<RatingRecord> records() const {
    std::vector<RatingRecord> out;
    out.reserve(cells_.size());
    for (const auto& [key, rating] : cells_) {
      out.push_back({std::get<2>(key), std::get<1>(key), std::get<0>(key), rating});
    }
    return out;
  }

  ItemSet items_rated_by(const std::string& rater_id, const std::string& metric) const {
    ItemSet out;
    auto it = cells_.lower_bound(Key{metric, rater_id, std::string{}});
    for (; it != cells_.end() && std::get<0>(it->first) == metric && std::get<1>(it->first) == rater_id; ++it) {
      out.insert(std::get<2>(it->first));
    }
    return out;
  }

  std::map<std::string, int> column(const std::string& rater_id, const std::string& metric) const {
    std::map<std::string, int> out;
    auto it = cells_.lower_bound(Key{metric, rater_id, std::string{}});
    for (; it != cells_.end() && std::get<0>(it->first) == metric && std::get<1>(it->first) == rater_id; ++it) {
      out.emplace(std::get<2>(it->first), it->second);
    }
    return out;
  }

  bool has_rater(const std::string& rater_id) const { return roles_.count(rater_id) > 0; }
  RaterRole role(const std::string& rater_id) const {
    auto it = roles_.find(rater_id);
    return it == roles_.end() ? default_role(rater_id) : it->second;
  }

  const RatingScale& scale() const { return scale_; }
  const ItemSet& items() const { return items_; }
  const std::set<std::string>& metrics() const { return metrics_; }
  const std::map<std::string, RaterRole>& roster() const { return roles_; }
  std::size_t size() const { return cells_.size(); }

  // Raters whose id starts with "ai_" default to ai_judge; experts are tagged
  // explicitly by the caller.
  static RaterRole default_role(const std::string& rater_id) {
    return rater_id.rfind("ai_", 0) == 0 ? RaterRole::kAiJudge : RaterRole::kTrainedNovice;
  }

 private:
  using Key = std::tuple<std::string, std::string, std::string>;  // metric, rater, item

  RatingScale scale_;
  std::map<Key, int> cells_;
  ItemSet items_;
  std::set<std::string> metrics_;
  std::map<std::string, RaterRole> roles_;
};

namespace detail {

inline int parse_int(const std::string& text, std::size_t line) {
  int value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc{} || ptr != last) {
    throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": rating '" + text + "' is not an integer");
  }
  return value;
}

}  // namespace detail

inline const std::vector<std::string>& ratings_header() {
  static const std::vector<std::string> header{"item_id", "rater_id", "metric", "rating"};
  return header;
}

// Reads the `item_id,rater_id,metric,rating` CSV into `matrix`, so several
// files can be merged into one grid.
inline void load_ratings_into(std::istream& in, RatingMatrix& matrix) {
  csv::Reader reader(in);
  csv::expect_header(reader, ratings_header());
  while (auto row = reader.next()) {
    if (csv::is_blank(*row)) continue;
    if (row->fields.size() != 4) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(row->line) + ": expected 4 columns, got " +
                                         std::to_string(row->fields.size()));
    }
    RatingRecord record{row->fields[0], row->fields[1], row->fields[2],
                        detail::parse_int(row->fields[3], row->line)};
    if (record.item_id.empty() || record.rater_id.empty() || record.metric.empty()) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(row->line) + ": empty identifier");
    }
    try {
      matrix.add(record);
    } catch (const Error& e) {
      rethrow_with_context(e, "line " + std::to_string(row->line));
    }
  }
}

inline RatingMatrix load_ratings(std::istream& in, RatingScale scale = {}) {
  RatingMatrix matrix(scale);
  load_ratings_into(in, matrix);
  return matrix;
}

inline void write_ratings(std::ostream& out, const RatingMatrix& matrix) {
  csv::write_row(out, ratings_header());
  for (const auto& r : matrix.records()) {
    csv::write_row(out, {r.item_id, r.rater_id, r.metric, std::to_string(r.rating)});
  }
}

struct FilterResult {
  RatingMatrix matrix;
  std::size_t dropped_items = 0;
  std::size_t warnings = 0;  // non-zero when nothing survived
};

// Keeps exactly the items rated by every listed rater on `metric`. All records
// of surviving items are kept unchanged.
inline FilterResult complete_case_filter(const RatingMatrix& matrix, const std::vector<std::string>& raters,
                                         const std::string& metric) {
  if (raters.empty()) throw Error(ErrorCode::kParameter, "complete-case filter needs at least one rater");
  ItemSet keep = matrix.items();
  for (const auto& rater : raters) {
    ItemSet rated = matrix.items_rated_by(rater, metric);
    ItemSet both;
    std::set_intersection(keep.begin(), keep.end(), rated.begin(), rated.end(), std::inserter(both, both.end()));
    keep = std::move(both);
  }
  FilterResult result{RatingMatrix(matrix.scale()), matrix.items().size() - keep.size(), 0};
  for (const auto& record : matrix.records()) {
    if (keep.count(record.item_id)) result.matrix.add(record);
  }
  for (const auto& [rater, role] : matrix.roster()) result.matrix.set_role(rater, role);
  if (keep.empty()) result.warnings = 1;
  return result;
}

struct DatasetSplit {
  ItemSet context_pool;
  ItemSet test_set;
};

// Items on which both experts gave the same rating for `metric`, with that rating.
inline std::map<std::string, int> agreed_items(const RatingMatrix& matrix, const std::string& expert_a,
                                               const std::string& expert_b, const std::string& metric) {
  std::map<std::string, int> out;
  auto col_a = matrix.column(expert_a, metric);
  auto col_b = matrix.column(expert_b, metric);
  for (const auto& [item, rating] : col_a) {
    auto it = col_b.find(item);
    if (it != col_b.end() && it->second == rating) out.emplace(item, rating);
  }
  return out;
}

inline DatasetSplit split_context_pool(const RatingMatrix& matrix, const std::string& expert_a,
                                       const std::string& expert_b, const std::string& metric,
                                       std::size_t pool_size, std::uint64_t seed) {
  auto agreed = agreed_items(matrix, expert_a, expert_b, metric);
  if (agreed.size() < pool_size) {
    throw Error(ErrorCode::kInsufficientAgreement,
                "requested " + std::to_string(pool_size) + " context items but only " +
                    std::to_string(agreed.size()) + " items have matching expert ratings on '" + metric + "'");
  }
  std::vector<std::string> candidates;
  candidates.reserve(agreed.size());
  for (const auto& [item, rating] : agreed) candidates.push_back(item);

  SeededRng rng(seed);
  DatasetSplit split;
  for (auto& item : rng.sample(std::move(candidates), pool_size)) split.context_pool.insert(std::move(item));
  for (const auto& item : matrix.items()) {
    if (!split.context_pool.count(item)) split.test_set.insert(item);
  }
  return split;
}

inline void write_split_manifest(std::ostream& out, const DatasetSplit& split) {
  csv::write_row(out, {"item_id", "partition"});
  std::map<std::string, const char*> rows;
  for (const auto& item : split.context_pool) rows.emplace(item, "context");
  for (const auto& item : split.test_set) rows.emplace(item, "test");
  for (const auto& [item, partition] : rows) csv::write_row(out, {item, partition});
}

inline DatasetSplit read_split_manifest(std::istream& in) {
  csv::Reader reader(in);
  csv::expect_header(reader, {"item_id", "partition"});
  DatasetSplit split;
  while (auto row = reader.next()) {
    if (csv::is_blank(*row)) continue;
    if (row->fields.size() != 2) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(row->line) + ": expected 2 columns");
    }
    const auto& partition = row->fields[1];
    if (partition == "context") {
      split.context_pool.insert(row->fields[0]);
    } else if (partition == "test") {
      split.test_set.insert(row->fields[0]);
    } else {
      throw Error(ErrorCode::kParse, "line " + std::to_string(row->line) + ": unknown partition '" + partition + "'");
    }
  }
  return split;
}

// Aligned ratings for one (candidate, reference, metric) triple. `a` holds the
// candidate's ratings, `b` the reference's; differences are always b - a.
struct PairedRatings {
  std::vector<std::string> item_ids;
  std::vector<int> a;
  std::vector<int> b;
  RatingScale scale;

  std::size_t size() const { return a.size(); }

  void validate() const {
    if (a.size() != b.size()) throw Error(ErrorCode::kShape, "paired vectors differ in length");
    if (!item_ids.empty() && item_ids.size() != a.size()) {
      throw Error(ErrorCode::kShape, "item ids do not match paired vector length");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!scale.contains(a[i]) || !scale.contains(b[i])) {
        throw Error(ErrorCode::kRange, "paired rating outside scale at position " + std::to_string(i));
      }
    }
  }
};

inline PairedRatings make_paired(std::vector<int> a, std::vector<int> b, RatingScale scale = {}) {
  PairedRatings pair{{}, std::move(a), std::move(b), scale};
  pair.validate();
  return pair;
}

// Items are visited in lexicographic item_id order.
inline PairedRatings paired_vector(const RatingMatrix& matrix, const std::string& rater_a,
                                   const std::string& rater_b, const std::string& metric, const ItemSet& items) {
  PairedRatings pair;
  pair.scale = matrix.scale();
  pair.item_ids.reserve(items.size());
  for (const auto& item : items) {
    auto ra = matrix.rating(item, rater_a, metric);
    if (!ra) throw Error(ErrorCode::kMissingData, "item '" + item + "' has no '" + metric + "' rating from '" + rater_a + "'");
    auto rb = matrix.rating(item, rater_b, metric);
    if (!rb) throw Error(ErrorCode::kMissingData, "item '" + item + "' has no '" + metric + "' rating from '" + rater_b + "'");
    pair.item_ids.push_back(item);
    pair.a.push_back(*ra);
    pair.b.push_back(*rb);
  }
  return pair;
}

}  // namespace rater_equiv
