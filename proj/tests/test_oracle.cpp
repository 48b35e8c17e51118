#include <gtest/gtest.h>

#include <cmath>

#include "eofair/error.hpp"
#include "eofair/oracle.hpp"
#include "eofair/random.hpp"

using namespace eofair;

namespace {

SyntheticDistribution asymmetric() {
  return SyntheticDistribution::linear(0.5, 0.1, 0.8, 0.2, 0.7);
}

SyntheticDistribution uniform_identity() {
  return SyntheticDistribution::linear(0.5, 0.0, 1.0, 0.0, 1.0);
}

}  // namespace

TEST(Distribution, RejectsInvalidLaws) {
  GroupLaw flat{0.0, 1.0, {{0.0, 0.7}, {1.0, 0.7}}};
  GroupLaw ok{0.0, 1.0, {{0.0, 0.1}, {1.0, 0.9}}};
  EXPECT_THROW(SyntheticDistribution(0.5, {flat, ok}), ValueError);
  GroupLaw low{0.0, 1.0, {{0.0, 0.1}, {1.0, 0.4}}};
  EXPECT_THROW(SyntheticDistribution(0.5, {ok, low}), ValueError);
  EXPECT_THROW(SyntheticDistribution(1.0, {ok, ok}), ValueError);
  GroupLaw gap{0.0, 1.0, {{0.0, 0.1}, {0.9, 0.9}}};
  EXPECT_THROW(SyntheticDistribution(0.5, {gap, ok}), ValueError);
  GroupLaw neg{0.0, -1.0, {{0.0, 0.1}, {1.0, 0.9}}};
  EXPECT_THROW(SyntheticDistribution(0.5, {neg, ok}), ValueError);
}

TEST(Distribution, PiecewiseLinearEvaluation) {
  GroupLaw g{1.0, 2.0, {{0.0, 0.1}, {0.5, 0.3}, {1.0, 0.9}}};
  const SyntheticDistribution d(0.3, {g, g});
  EXPECT_DOUBLE_EQ(d.eta_latent(0.25, 0), 0.2);
  EXPECT_DOUBLE_EQ(d.eta(2.0, 0), 0.3);
  EXPECT_DOUBLE_EQ(d.eta(4.0, 1), 0.9);  // clamped outside the support
  EXPECT_DOUBLE_EQ(d.threshold_latent(0.6, 0), 0.75);
  EXPECT_DOUBLE_EQ(d.threshold_latent(0.05, 0), 0.0);
  EXPECT_DOUBLE_EQ(d.threshold_latent(0.95, 0), 1.0);
  EXPECT_NEAR(d.integral_eta(0.0, 1.0, 0), 0.5 * 0.2 + 0.5 * 0.6, 1e-15);
}

TEST(Moments, UniformIdentity) {
  const Moments m = exact_moments(uniform_identity());
  for (int s = 0; s < 2; ++s) {
    EXPECT_NEAR(m.mean_eta[s], 0.5, 1e-12);
    EXPECT_NEAR(m.joint[s], 0.25, 1e-12);
  }
  EXPECT_EQ(m.quadrature_points, (std::size_t{1} << 17) + 1);
}

TEST(Moments, AsymmetricClosedForm) {
  const Moments m = exact_moments(asymmetric());
  EXPECT_NEAR(m.mean_eta[1], 0.55, 1e-8);
  EXPECT_NEAR(m.mean_eta[0], 0.50, 1e-8);
  EXPECT_NEAR(m.joint[1], 0.275, 1e-8);
  EXPECT_NEAR(m.joint[0], 0.25, 1e-8);
  EXPECT_NEAR(m.p_y1, 0.525, 1e-8);
}

TEST(Moments, QuadratureDoublingIsStable) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SyntheticDistribution d = random_distribution(seed);
    const Moments a = exact_moments(d, std::size_t{1} << 17);
    const Moments b = exact_moments(d, std::size_t{1} << 18);
    for (int s = 0; s < 2; ++s) EXPECT_NEAR(a.mean_eta[s], b.mean_eta[s], 1e-9);
  }
}

TEST(TprGap, SymmetricIsZeroAtOrigin) {
  EXPECT_NEAR(tpr_gap(0.0, uniform_identity()), 0.0, 1e-12);
}

TEST(TprGap, AsymmetricClosedFormAtZero) {
  // TPR_1 = 0.4 / 0.55, TPR_0 = 0.35 / 0.5.
  EXPECT_NEAR(tpr_gap(0.0, asymmetric()), 3.0 / 110.0, 1e-9);
}

TEST(TprGap, NonIncreasing) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SyntheticDistribution d = random_distribution(seed);
    const Moments m = exact_moments(d);
    double prev = tpr_gap(-2.0, d, m);
    for (int i = 1; i <= 400; ++i) {
      const double g = tpr_gap(-2.0 + 4.0 * i / 400.0, d, m);
      ASSERT_LE(g, prev + 1e-15);
      prev = g;
    }
  }
}

TEST(SolveThetaStar, AsymmetricReference) {
  const OracleSolution sol = solve_theta_star(asymmetric());
  EXPECT_NEAR(sol.theta_star, 0.0112375854053334, 1e-7);
  EXPECT_NEAR(sol.tpr_common, 0.713587222272544, 1e-7);
  EXPECT_NEAR(sol.risk_star, 0.310867470806137, 1e-8);
  EXPECT_NEAR(sol.thresholds[1], 0.443470104686640, 1e-7);
  EXPECT_NEAR(sol.thresholds[0], 0.486261786928743, 1e-7);
  EXPECT_LE(std::fabs(sol.gap_at_solution), 1e-6);
  EXPECT_LE(sol.bracket_width, 1e-8);
}

TEST(SolveThetaStar, SymmetricIsZero) {
  EXPECT_NEAR(solve_theta_star(uniform_identity()).theta_star, 0.0, 1e-8);
}

TEST(SolveThetaStar, SignFollowsGapAtZero) {
  // Same eta(x) = x; group 1 only lives on [0.5, 1].
  const SyntheticDistribution d(0.5, {GroupLaw{0.0, 1.0, {{0.0, 0.0}, {1.0, 1.0}}},
                                      GroupLaw{0.5, 0.5, {{0.0, 0.5}, {1.0, 1.0}}}});
  const double g0 = tpr_gap(0.0, d);
  const double theta = solve_theta_star(d).theta_star;
  ASSERT_NE(g0, 0.0);
  EXPECT_EQ(g0 > 0.0, theta > 0.0);
}

TEST(SolveThetaStar, RandomLawsBounded) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const OracleSolution sol = solve_theta_star(random_distribution(seed));
    EXPECT_LE(std::fabs(sol.theta_star), 2.0);
    EXPECT_LE(std::fabs(sol.gap_at_solution), 1e-6);
  }
}

TEST(Risk, IdentityMatchesDirectQuadrature) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const SyntheticDistribution d = random_distribution(seed);
    const Moments m = exact_moments(d);
    auto rng = make_rng({seed, 17});
    for (int i = 0; i < 5; ++i) {
      const ThresholdRule rule{{uniform01(rng), uniform01(rng)}};
      EXPECT_NEAR(risk_identity(d, rule, m), risk_direct(d, rule), 1e-8);
    }
  }
}

TEST(Risk, OptimalRuleBeatsOtherFairRules) {
  const SyntheticDistribution d = asymmetric();
  const OracleSolution sol = solve_theta_star(d);
  const Moments m = exact_moments(d);
  // Always rejecting is fair; its risk is P(Y = 1).
  EXPECT_LT(sol.risk_star, risk_identity(d, ThresholdRule{{1.0, 1.0}}, m));
  EXPECT_NEAR(risk_identity(d, ThresholdRule{{1.0, 1.0}}, m), m.p_y1, 1e-12);
}

TEST(OptimalDecision, ExactPluginMatchesOracle) {
  const SyntheticDistribution d = asymmetric();
  const OracleSolution sol = solve_theta_star(d);
  GroupStatistics st;
  st.p = {0.5, 0.5};
  st.mean_score = sol.mean_eta;
  st.joint = sol.joint;
  const FairClassifier clf(sol.theta_star, st, 0.0, std::nullopt, 1e-6);
  std::size_t compared = 0;
  for (int s = 0; s < 2; ++s) {
    for (int i = 0; i < 5000; ++i) {
      const double x = (i + 0.5) / 5000.0;
      if (std::fabs(x - sol.thresholds[s]) <= 1e-6) continue;
      ASSERT_EQ(clf.decide(d.eta(x, s), s), optimal_decision(sol, d, x, s)) << x;
      ++compared;
    }
  }
  EXPECT_GE(compared, 9990u);
}

TEST(Sample, DeterministicAndCalibrated) {
  const SyntheticDistribution d = uniform_identity();
  const SyntheticSample a = sample(d, 1000, 7);
  const SyntheticSample b = sample(d, 1000, 7);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.s, b.s);

  const SyntheticSample big = sample(d, 1000000, 1);
  std::size_t joint1 = 0;
  for (std::size_t i = 0; i < big.size(); ++i) joint1 += big.y[i] == 1 && big.s[i] == 1;
  EXPECT_NEAR(static_cast<double>(joint1) / 1e6, 0.25, 0.002);
}

TEST(Sample, SingleRow) {
  const SyntheticSample one = sample(asymmetric(), 1, 3);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_TRUE(one.s[0] == 0 || one.s[0] == 1);
  EXPECT_TRUE(one.y[0] == 0 || one.y[0] == 1);
  EXPECT_THROW(one.to_labeled(), GroupCoverageError);
}

TEST(ExactScores, MarginalMixesGroups) {
  const SyntheticDistribution d = asymmetric();
  const std::vector<double> x{0.25};
  const ScoreTable t = exact_scores(d, x);
  EXPECT_DOUBLE_EQ(t.s0[0], 0.3);
  EXPECT_DOUBLE_EQ(t.s1[0], 0.375);
  EXPECT_DOUBLE_EQ((*t.marginal)[0], 0.3375);
}

TEST(Consistency, ReproducibleTable) {
  ConsistencyConfig cfg;
  cfg.N_grid = {200};
  cfg.repeats = 1;
  cfg.test_size = 2000;
  cfg.seed = 5;
  const auto a = consistency_run(asymmetric(), cfg);
  const auto b = consistency_run(asymmetric(), cfg);
  ASSERT_EQ(a.rows.size(), 1u);
  EXPECT_EQ(a.rows[0].deo_mean, b.rows[0].deo_mean);
  EXPECT_EQ(a.rows[0].excess_mean, b.rows[0].excess_mean);
  EXPECT_EQ(a.rows[0].theta_mean, b.rows[0].theta_mean);
}

TEST(Consistency, ExcessRiskNotSignificantlyNegative) {
  ConsistencyConfig cfg;
  cfg.N_grid = {100, 1000};
  cfg.repeats = 10;
  cfg.test_size = 20000;
  const auto r = consistency_run(asymmetric(), cfg);
  for (const auto& row : r.rows) {
    EXPECT_GE(row.excess_mean, -3.0 * row.excess_se - 1e-12) << "N=" << row.N;
  }
}
