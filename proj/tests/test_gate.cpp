#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "rater_equiv/gate.hpp"

using namespace rater_equiv;

namespace {

// Row of printed statistics; loa is the half-width 1.96*sd.
PairStats printed(double kappa, double icc, double mae, double bias, double loa, bool tost, double spearman,
                  double p, double auc) {
  PairStats s;
  s.agreement.kappa = kappa;
  s.agreement.icc = icc;
  s.agreement.mae = mae;
  s.agreement.bland_altman.bias = bias;
  s.agreement.bland_altman.sd = loa / kLoaZ;
  s.agreement.spearman_rho = spearman;
  s.tost.equivalent = tost;
  s.wilcoxon_p_corrected = p;
  s.jaccard_auc = auc;
  return s;
}

const PairStats kUniquenessBaseline = printed(0.54, 0.54, 1.10, 0.33, 2.85, true, 0.54, 2.11e-09, 0.64);

PairStats random_stats(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0), m(0.2, 2.5), b(-1.5, 1.5), l(1.0, 4.0), p(0.0, 1.0);
  return printed(u(rng), u(rng), m(rng), b(rng), l(rng), p(rng) < 0.5, u(rng), p(rng), u(rng));
}

}  // namespace

TEST(Gate, PublishedRowAllNinePass) {
  auto r = evaluate_gate(printed(0.51, 0.51, 1.04, -0.10, 2.67, true, 0.50, 1.22e-01, 0.64), kUniquenessBaseline, {});
  EXPECT_EQ(r.passed, 9);
}

TEST(Gate, PublishedRowThreePass) {
  auto r = evaluate_gate(printed(0.42, 0.42, 1.40, 1.15, 2.77, false, 0.53, 1.73e-77, 0.66), kUniquenessBaseline, {});
  EXPECT_EQ(r.passed, 3);
  EXPECT_TRUE(r.flag(Criterion::kBaLoa));
  EXPECT_TRUE(r.flag(Criterion::kSpearman));
  EXPECT_TRUE(r.flag(Criterion::kJaccardAuc));
  EXPECT_FALSE(r.flag(Criterion::kMae));
}

TEST(Gate, BoundaryIsInclusive) {
  // 1.2 * 1.25 == 1.5 up to binary rounding
  auto base = printed(0.26, 0.26, 1.25, 0.2, 2.8, true, 0.3, 0.5, 0.59);
  auto cand = base;
  cand.agreement.mae = 1.50;
  EXPECT_TRUE(evaluate_gate(cand, base, {}).flag(Criterion::kMae));
  cand.agreement.mae = 1.5000001;
  EXPECT_FALSE(evaluate_gate(cand, base, {}).flag(Criterion::kMae));
}

TEST(Gate, BiasUsesMagnitudes) {
  auto base = printed(0.5, 0.5, 1.0, -0.5, 2.8, true, 0.5, 0.5, 0.6);
  auto cand = base;
  cand.agreement.bland_altman.bias = 0.6;
  EXPECT_TRUE(evaluate_gate(cand, base, {}).flag(Criterion::kBaBias));
  cand.agreement.bland_altman.bias = -0.61;
  EXPECT_FALSE(evaluate_gate(cand, base, {}).flag(Criterion::kBaBias));
}

TEST(Gate, LoaBandIsTwoSided) {
  auto base = printed(0.5, 0.5, 1.0, 0.1, 2.5, true, 0.5, 0.5, 0.6);
  auto cand = base;
  cand.agreement.bland_altman.sd = 3.1 / kLoaZ;
  EXPECT_FALSE(evaluate_gate(cand, base, {}).flag(Criterion::kBaLoa));
  cand.agreement.bland_altman.sd = 1.9 / kLoaZ;
  EXPECT_FALSE(evaluate_gate(cand, base, {}).flag(Criterion::kBaLoa));
  cand.agreement.bland_altman.sd = 2.1 / kLoaZ;
  EXPECT_TRUE(evaluate_gate(cand, base, {}).flag(Criterion::kBaLoa));
}

TEST(Gate, NonPositiveBaselinePassesVacuouslyWithWarning) {
  auto base = printed(-0.1, 0.5, 1.0, 0.1, 2.5, true, 0.5, 0.5, 0.6);
  auto cand = printed(-0.9, 0.5, 1.0, 0.1, 2.5, true, 0.5, 0.5, 0.6);
  auto r = evaluate_gate(cand, base, {});
  EXPECT_TRUE(r.flag(Criterion::kKappa));
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("kappa"), std::string::npos);
}

TEST(Gate, UndefinedBaselineIsAGateError) {
  auto base = kUniquenessBaseline;
  base.agreement.spearman_rho.reset();
  try {
    evaluate_gate(kUniquenessBaseline, base, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGate);
  }
  base = kUniquenessBaseline;
  base.agreement.mae = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(evaluate_gate(kUniquenessBaseline, base, {}), Error);
}

TEST(Gate, UndefinedCandidateSpearmanFailsOnlyThatCriterion) {
  auto cand = kUniquenessBaseline;
  cand.agreement.spearman_rho.reset();
  cand.wilcoxon_p_corrected = 0.5;
  auto r = evaluate_gate(cand, kUniquenessBaseline, {});
  EXPECT_FALSE(r.flag(Criterion::kSpearman));
  EXPECT_EQ(r.passed, 8);
}

TEST(Gate, InvalidConfig) {
  GateConfig c;
  c.tolerance = 0.0;
  EXPECT_THROW(evaluate_gate(kUniquenessBaseline, kUniquenessBaseline, c), Error);
  c.tolerance = 1.0;
  EXPECT_THROW(evaluate_gate(kUniquenessBaseline, kUniquenessBaseline, c), Error);
}

TEST(Gate, SelfComparisonPassesEveryTolerance) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = random_stats(rng);
    s.tost.equivalent = true;
    s.wilcoxon_p_corrected = 0.5;
    for (double t : {0.05, 0.2, 0.5}) {
      GateConfig c;
      c.tolerance = t;
      EXPECT_EQ(evaluate_gate(s, s, c).passed, 9);
    }
  }
}

TEST(Gate, MonotoneInTolerance) {
  std::mt19937_64 rng(100);
  for (int trial = 0; trial < 1000; ++trial) {
    auto base = random_stats(rng), cand = random_stats(rng);
    int prev = -1;
    for (double t : {0.05, 0.1, 0.2, 0.3, 0.5, 0.9}) {
      GateConfig c;
      c.tolerance = t;
      auto r = evaluate_gate(cand, base, c);
      // the LoA band widens on both sides, so every flag is monotone
      EXPECT_GE(r.passed, prev);
      prev = r.passed;
    }
  }
}

TEST(Gate, AggregateMean) {
  auto make = [](int k) {
    GateReport r;
    r.passed = k;
    return r;
  };
  EXPECT_NEAR(aggregate_runs({make(9), make(8), make(9)}).mean_passed, 26.0 / 3.0, 1e-12);
  EXPECT_THROW(aggregate_runs({}), Error);
}
