#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "rater_equiv/topset.hpp"
#include "test_util.hpp"

using namespace rater_equiv;

namespace {

ItemSet items(std::initializer_list<const char*> ids) {
  ItemSet s;
  for (const char* id : ids) s.insert(id);
  return s;
}

PairedRatings with_ids(std::vector<int> a, std::vector<int> b) {
  auto p = make_paired(std::move(a), std::move(b));
  for (std::size_t i = 0; i < p.size(); ++i) p.item_ids.push_back("s" + std::to_string(10 + i));
  return p;
}

}  // namespace

TEST(TopSet, BoundaryTieAbsorbed) {
  auto top = tie_inclusive_top_set({{"A", 6}, {"B", 5}, {"C", 5}, {"D", 4}}, 2);
  EXPECT_EQ(top.items, items({"A", "B", "C"}));
  EXPECT_EQ(top.boundary_rating, 5);
  EXPECT_DOUBLE_EQ(top.actual_fraction, 0.75);
}

TEST(TopSet, FullAndDistinct) {
  std::map<std::string, int> r{{"A", 1}, {"B", 4}, {"C", 2}, {"D", 6}, {"E", 3}};
  EXPECT_EQ(tie_inclusive_top_set(r, 5).items.size(), 5u);
  EXPECT_DOUBLE_EQ(tie_inclusive_top_set(r, 5).actual_fraction, 1.0);
  EXPECT_EQ(tie_inclusive_top_set(r, 3).items, items({"B", "D", "E"}));
  EXPECT_THROW(tie_inclusive_top_set(r, 0), Error);
  EXPECT_THROW(tie_inclusive_top_set(r, 6), Error);
}

TEST(TopSet, NestedInTarget) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> v(1, 6);
  for (int trial = 0; trial < 50; ++trial) {
    std::map<std::string, int> r;
    for (int i = 0; i < 15; ++i) r["i" + std::to_string(i)] = v(rng);
    for (std::size_t n = 1; n < 15; ++n) {
      const auto small = tie_inclusive_top_set(r, n).items, big = tie_inclusive_top_set(r, n + 1).items;
      EXPECT_TRUE(std::includes(big.begin(), big.end(), small.begin(), small.end()));
      EXPECT_EQ(small, oracle::top_set_by_threshold(r, n));
    }
  }
}

TEST(Jaccard, Examples) {
  EXPECT_DOUBLE_EQ(jaccard(items({"A", "B"}), items({"A", "B"})), 1.0);
  EXPECT_DOUBLE_EQ(jaccard(items({"A"}), items({"B"})), 0.0);
  EXPECT_DOUBLE_EQ(jaccard(items({"A", "B", "C"}), items({"B", "C", "D"})), 0.5);
  EXPECT_DOUBLE_EQ(jaccard(items({"A", "B", "C"}), items({"B"})), jaccard(items({"B"}), items({"A", "B", "C"})));
  try {
    jaccard({}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndefined);
  }
}

TEST(CurveAuc, Examples) {
  EXPECT_DOUBLE_EQ(curve_auc({{0.1, 0.1, 0.0}, {1.0, 1.0, 1.0}}), 0.5);
  EXPECT_NEAR(curve_auc({{0.2, 0.2, 0.4}, {0.5, 0.5, 0.4}, {1.0, 1.0, 0.4}}), 0.4, 1e-15);
  EXPECT_DOUBLE_EQ(curve_auc({{0.05, 0.05, 1.0}, {0.3, 0.3, 1.0}, {1.0, 1.0, 1.0}}), 1.0);
  try {
    curve_auc(std::vector<CurvePoint>{{1.0, 1.0, 1.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
}

TEST(JaccardCurve, IdenticalRatersGiveUnitCurve) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> v(1, 6);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> a(5 + trial);
    for (auto& x : a) x = v(rng);
    auto curve = jaccard_curve(with_ids(a, a), ReferenceSide::kB, default_fraction_grid());
    for (const auto& p : curve.points) EXPECT_EQ(p.jaccard, 1.0);
    EXPECT_EQ(curve.auc, 1.0);
  }
}

TEST(JaccardCurve, TenItemBoundaryTieAtTwentyPercent) {
  // expert (b): s10=6 s11=5 s12=5 s13=5 ...; f=0.2 -> N=2 -> ties at 5 give N_e=4
  auto p = with_ids({6, 2, 5, 5, 1, 3, 4, 6, 2, 1}, {6, 5, 5, 5, 4, 3, 3, 2, 1, 1});
  auto curve = jaccard_curve(p, ReferenceSide::kB, {0.2});
  ASSERT_EQ(curve.points.size(), 2u);
  EXPECT_DOUBLE_EQ(curve.points[0].actual_fraction, 0.4);
  // candidate top at 4: {s10:6, s17:6, s12:5, s13:5}; expert {s10,s11,s12,s13} -> 3/5
  EXPECT_DOUBLE_EQ(curve.points[0].jaccard, 0.6);
  EXPECT_DOUBLE_EQ(curve.points[1].actual_fraction, 1.0);
  EXPECT_DOUBLE_EQ(curve.points[1].jaccard, 1.0);
  std::map<std::string, int> e, c;
  for (std::size_t i = 0; i < p.size(); ++i) {
    e[p.item_ids[i]] = p.b[i];
    c[p.item_ids[i]] = p.a[i];
  }
  auto ref = oracle::jaccard_curve(e, c, {0.2});
  ASSERT_EQ(ref.size(), 2u);
  EXPECT_DOUBLE_EQ(ref[0].y, 0.6);
}

TEST(JaccardCurve, DuplicateXKeepsLaterGridEntry) {
  // fractions 0.05..0.75 all land on x = 0.75 because of the three-way tie
  auto p = with_ids({1, 2, 3, 4}, {3, 3, 3, 1});
  auto curve = jaccard_curve(p, ReferenceSide::kB, default_fraction_grid());
  ASSERT_EQ(curve.points.size(), 2u);
  EXPECT_DOUBLE_EQ(curve.points[0].nominal_fraction, 0.75);
  EXPECT_DOUBLE_EQ(curve.points[0].actual_fraction, 0.75);
  EXPECT_DOUBLE_EQ(curve.points[0].jaccard, 0.5);
  EXPECT_DOUBLE_EQ(curve.auc, 0.75);
  EXPECT_THROW(jaccard_curve(p, ReferenceSide::kB, {0.0}), Error);
  EXPECT_THROW(jaccard_curve(p, ReferenceSide::kB, {1.5}), Error);
}

TEST(JaccardCurve, ConstantExpertHasNoArea) {
  auto p = with_ids({1, 2, 3, 4}, {3, 3, 3, 3});
  EXPECT_THROW(jaccard_curve(p, ReferenceSide::kB, default_fraction_grid()), Error);
}

TEST(JaccardCurve, MatchesThresholdOracleOnRandomPairs) {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 100; ++trial) {
    auto p = testutil::random_pair(rng, 12);
    std::map<std::string, int> e, c;
    for (std::size_t i = 0; i < p.size(); ++i) {
      e[p.item_ids[i]] = p.b[i];
      c[p.item_ids[i]] = p.a[i];
    }
    const auto grid = default_fraction_grid();
    auto curve = jaccard_curve(p, ReferenceSide::kB, grid);
    auto ref = oracle::jaccard_curve(e, c, grid);
    ASSERT_EQ(curve.points.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_DOUBLE_EQ(curve.points[i].actual_fraction, ref[i].x);
      EXPECT_DOUBLE_EQ(curve.points[i].jaccard, ref[i].y);
    }
    if (ref.size() >= 2) {
      EXPECT_NEAR(curve.auc, oracle::auc(ref), 1e-12);
    }
  }
}

TEST(NominalCount, CeilingIgnoresRepresentationError) {
  EXPECT_EQ(nominal_count(0.55, 880), 484u);  // 0.55 * 880 evaluates to 484.00000000000006
  EXPECT_EQ(nominal_count(0.05, 30), 2u);
  EXPECT_EQ(nominal_count(0.01, 10), 1u);
  EXPECT_EQ(nominal_count(1.0, 934), 934u);
}
