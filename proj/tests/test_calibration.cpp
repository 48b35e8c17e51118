#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "eofair/calibration.hpp"
#include "eofair/error.hpp"
#include "eofair/random.hpp"

using namespace eofair;

namespace {

// S = [1, 1, 0, 0] with scores {0.9, 0.2} and {0.8, 0.4}.
GroupScores four_rows() { return GroupScores{{0.8, 0.4}, {0.9, 0.2}}; }

GroupScores random_groups(std::uint64_t seed, std::size_t n) {
  auto rng = make_rng({seed, 77});
  GroupScores g;
  const double floor = 0.05 + 0.2 * uniform01(rng);
  const double tilt = uniform01(rng);
  for (std::size_t i = 0; i < n; ++i) {
    double v = uniform01(rng);
    const bool one = uniform01(rng) < 0.5;
    if (one) v = std::pow(v, 0.5 + tilt);
    v = std::max(v, floor);
    (one ? g.group1 : g.group0).push_back(v);
  }
  if (g.group0.empty()) g.group0.push_back(0.5);
  if (g.group1.empty()) g.group1.push_back(0.5);
  return g;
}

}  // namespace

TEST(GroupStatistics, FourRowExample) {
  const std::vector<double> scores{0.9, 0.2, 0.8, 0.4};
  const std::vector<int> s{1, 1, 0, 0};
  const GroupStatistics st = group_statistics(scores, s);
  EXPECT_DOUBLE_EQ(st.p[1], 0.5);
  EXPECT_DOUBLE_EQ(st.p[0], 0.5);
  EXPECT_NEAR(st.mean_score[1], 0.55, 1e-15);
  EXPECT_NEAR(st.joint[1], 0.275, 1e-15);
  EXPECT_NEAR(st.mean_score[0], 0.6, 1e-15);
  EXPECT_NEAR(st.joint[0], 0.3, 1e-15);
  EXPECT_EQ(st.joint[1], st.mean_score[1] * st.p[1]);
  EXPECT_EQ(st.count[0], 2u);
}

TEST(GroupStatistics, ConstantScores) {
  const std::vector<double> scores(7, 0.5);
  const std::vector<int> s{1, 0, 0, 1, 0, 0, 1};
  const GroupStatistics st = group_statistics(scores, s);
  EXPECT_DOUBLE_EQ(st.joint[0], 0.5 * st.p[0]);
  EXPECT_DOUBLE_EQ(st.joint[1], 0.5 * st.p[1]);
  EXPECT_DOUBLE_EQ(st.p[0] + st.p[1], 1.0);
}

TEST(GroupStatistics, SingleGroupRejected) {
  const std::vector<double> scores{0.3, 0.6};
  const std::vector<int> s{1, 1};
  EXPECT_THROW(group_statistics(scores, s), GroupCoverageError);
}

TEST(GroupStatistics, UnflooredScoreRejected) {
  const std::vector<double> scores{0.0, 0.6, 0.4};
  const std::vector<int> s{1, 1, 0};
  EXPECT_THROW(group_statistics(scores, s), ValueError);
}

TEST(EmpiricalUnfairness, FourRowAtZero) {
  const GroupScores g = four_rows();
  const GroupStatistics st = group_statistics(g);
  EXPECT_NEAR(empirical_unfairness(0.0, g, st), 0.9 / 1.1 - 0.8 / 1.2, 1e-15);
  EXPECT_NEAR(empirical_unfairness(0.0, g, st), 0.151515151515151515, 1e-15);
}

TEST(EmpiricalUnfairness, IdenticalGroupsAreFair) {
  const GroupScores g{{0.2, 0.7, 0.55, 0.9}, {0.9, 0.2, 0.55, 0.7}};
  EXPECT_EQ(empirical_unfairness(0.0, g, group_statistics(g)), 0.0);
}

TEST(EmpiricalUnfairness, PlusTwoSilencesGroupOne) {
  const GroupScores g = four_rows();
  const GroupStatistics st = group_statistics(g);
  EXPECT_EQ(weighted_tpr(2.0, g, st)[1], 0.0);
}

TEST(Breakpoints, AlgebraicValues) {
  EXPECT_NEAR(group1_switch_point(0.9, 0.275), 0.275 * (2.0 - 1.0 / 0.9), 1e-15);
  EXPECT_NEAR(group1_switch_point(0.9, 0.275), 0.244444444444444444, 1e-15);
  const double t0 = group0_switch_point(0.5, 0.3);
  EXPECT_NEAR(t0, 0.0, 1e-15);
  EXPECT_TRUE(accepts_group0(0.5, t0, 0.3));
  EXPECT_FALSE(accepts_group0(0.5, std::nextafter(t0, -1.0), 0.3));
  EXPECT_NEAR(group1_switch_point(0.1, 0.275), -2.2, 1e-14);
}

TEST(Breakpoints, OutOfRangeDropped) {
  const GroupScores g{{0.5, 0.6}, {0.9, 0.1}};
  GroupStatistics st = group_statistics(g);
  st.joint = {0.3, 0.275};
  for (const auto& bp : breakpoints(g, st)) {
    EXPECT_GE(bp.theta, -2.0);
    EXPECT_LE(bp.theta, 2.0);
    EXPECT_FALSE(bp.group == 1 && bp.row == 1);
  }
}

TEST(Breakpoints, SwitchPointsAreExact) {
  auto rng = make_rng({3});
  for (int i = 0; i < 2000; ++i) {
    const double score = 0.01 + 0.99 * uniform01(rng);
    const double joint = 0.01 + 0.6 * uniform01(rng);
    const double t1 = group1_switch_point(score, joint);
    EXPECT_TRUE(accepts_group1(score, t1, joint));
    EXPECT_FALSE(accepts_group1(score, std::nextafter(t1, 1e300), joint));
    const double t0 = group0_switch_point(score, joint);
    EXPECT_TRUE(accepts_group0(score, t0, joint));
    EXPECT_FALSE(accepts_group0(score, std::nextafter(t0, -1e300), joint));
  }
}

TEST(Predict, BoundaryConvention) {
  GroupStatistics st;
  st.p = {0.5, 0.5};
  st.mean_score = {0.6, 0.55};
  st.joint = {0.3, 0.275};
  const FairClassifier bayes(0.0, st, 0.0, std::nullopt, 0.1);
  EXPECT_EQ(bayes.decide(0.6, 1), 1);
  EXPECT_EQ(bayes.decide(0.4, 1), 0);
  EXPECT_EQ(bayes.decide(0.5, 0), 1);

  const double boundary = group1_switch_point(0.9, 0.275);
  EXPECT_NEAR(boundary, 0.2444444444444444, 1e-15);
  EXPECT_EQ(bayes.with_theta(boundary).decide(0.9, 1), 1);
  EXPECT_EQ(bayes.with_theta(std::nextafter(boundary, 1.0)).decide(0.9, 1), 0);
}

TEST(FitTheta, IdenticalGroupsGiveZero) {
  const GroupScores g{{0.3, 0.6, 0.8}, {0.8, 0.3, 0.6}};
  const ThetaFit fit = fit_theta(g, group_statistics(g));
  EXPECT_EQ(fit.theta, 0.0);
  EXPECT_EQ(fit.unfairness, 0.0);
}

TEST(FitTheta, FourRowMatchesGridScan) {
  const GroupScores g = four_rows();
  const GroupStatistics st = group_statistics(g);
  const ThetaFit fit = fit_theta(g, st);
  for (int i = 0; i <= 100000; ++i) {
    const double t = -2.0 + 4.0 * i / 100000.0;
    ASSERT_LE(fit.unfairness, empirical_unfairness(t, g, st)) << "theta " << t;
  }
  EXPECT_EQ(fit.unfairness, empirical_unfairness(fit.theta, g, st));
  EXPECT_LE(fit.unfairness, empirical_unfairness(0.0, g, st));
}

TEST(FitTheta, TieBreakPrefersSmallMagnitude) {
  EXPECT_TRUE(better_candidate(0.1, 0.2, 0.1, -0.3));
  EXPECT_TRUE(better_candidate(0.1, -0.2, 0.1, 0.2));
  EXPECT_FALSE(better_candidate(0.1, 0.2, 0.1, -0.2));
  EXPECT_TRUE(better_candidate(0.05, 1.9, 0.1, 0.0));
}

TEST(FitTheta, BoundedAndNoWorseThanZero) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const GroupScores g = random_groups(seed, 300);
    const GroupStatistics st = group_statistics(g);
    const ThetaFit fit = fit_theta(g, st);
    EXPECT_LE(std::fabs(fit.theta), 2.0);
    EXPECT_LE(fit.unfairness, empirical_unfairness(0.0, g, st));
  }
}

TEST(Profile, MatchesDirectEvaluation) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const GroupScores g = random_groups(seed, 500);
    const GroupStatistics st = group_statistics(g);
    const UnfairnessProfile profile(g, st);
    auto rng = make_rng({seed, 5});
    for (int i = 0; i < 200; ++i) {
      const double t = -3.0 + 6.0 * uniform01(rng);
      ASSERT_EQ(profile(t), empirical_unfairness(t, g, st));
    }
    for (const auto& bp : breakpoints(g, st)) {
      ASSERT_EQ(profile(bp.theta), empirical_unfairness(bp.theta, g, st));
    }
  }
}

TEST(Profile, MonotoneTprTerms) {
  const GroupScores g = random_groups(11, 800);
  const GroupStatistics st = group_statistics(g);
  auto rng = make_rng({11, 6});
  for (int i = 0; i < 500; ++i) {
    double a = -2.5 + 5.0 * uniform01(rng);
    double b = -2.5 + 5.0 * uniform01(rng);
    if (a > b) std::swap(a, b);
    const auto ta = weighted_tpr(a, g, st);
    const auto tb = weighted_tpr(b, g, st);
    EXPECT_GE(ta[1], tb[1]);
    EXPECT_LE(ta[0], tb[0]);
  }
}

TEST(Profile, ZeroIsBayesRule) {
  const GroupScores g = random_groups(4, 400);
  const GroupStatistics st = group_statistics(g);
  const FairClassifier clf(0.0, st, 0.0, std::nullopt, 1e-6);
  for (int s = 0; s < 2; ++s) {
    for (double v : g.of(s)) EXPECT_EQ(clf.decide(v, s), v >= 0.5 ? 1 : 0);
  }
}

TEST(Blind, SingleRowSwitchPoint) {
  EXPECT_NEAR(blind_switch_point(0.4, 0.5), 0.4, 1e-15);
  const double t = blind_switch_point(0.4, 0.5);
  EXPECT_TRUE(blind_accepts(0.4, 0.5, t));
  EXPECT_FALSE(blind_accepts(0.4, 0.5, std::nextafter(t, -1.0)));
  const double u = blind_switch_point(0.4, -0.5);
  EXPECT_TRUE(blind_accepts(0.4, -0.5, u));
  EXPECT_FALSE(blind_accepts(0.4, -0.5, std::nextafter(u, 1.0)));
}

TEST(Blind, EqualGroupScoresGiveZero) {
  BlindScores b{{0.3, 0.7, 0.6}, {0.2, 0.8, 0.5}, {0.2, 0.8, 0.5}};
  const ThetaFit fit = fit_theta_blind(b);
  EXPECT_EQ(fit.theta, 0.0);
}

TEST(Blind, MinimizerBeatsDenseGrid) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rng = make_rng({seed, 9});
    BlindScores b;
    for (int i = 0; i < 300; ++i) {
      const double s0 = std::max(0.05, uniform01(rng));
      const double s1 = std::max(0.05, std::pow(uniform01(rng), 0.6));
      b.group0.push_back(s0);
      b.group1.push_back(s1);
      b.marginal.push_back(0.5 * (s0 + s1));
    }
    const ThetaFit fit = fit_theta_blind(b);
    const BlindDirection dir = BlindDirection::from(b);
    EXPECT_EQ(fit.unfairness, blind_unfairness(fit.theta, b, dir));
    for (int i = 0; i <= 20000; ++i) {
      const double t = -50.0 + 100.0 * i / 20000.0;
      ASSERT_LE(fit.unfairness, blind_unfairness(t, b, dir)) << "theta " << t;
    }
  }
}

TEST(CalibrateScores, FloorsAndSolves) {
  ScoreTable t;
  t.s0 = {0.0, 0.3, 0.7, 0.9, 0.2, 0.6};
  t.s1 = {0.1, 0.95, 0.35, 0.8, 0.6, 0.2};
  const std::vector<int> s{1, 1, 0, 0, 1, 0};
  const FairClassifier clf = calibrate_scores(t, s, ScoreMode::kGroupAware);
  EXPECT_DOUBLE_EQ(clf.floor(), 0.49);
  EXPECT_LE(std::fabs(clf.theta_hat()), 2.0);
  EXPECT_THROW(calibrate_scores(t, std::nullopt, ScoreMode::kGroupAware), SchemaError);
  EXPECT_THROW(calibrate_scores(t, std::nullopt, ScoreMode::kBlind), SchemaError);
}

TEST(CalibrateScores, OneRowGroupRejected) {
  ScoreTable t;
  t.s0 = {0.3, 0.6, 0.7};
  t.s1 = {0.3, 0.6, 0.7};
  const std::vector<int> s{1, 0, 0};
  EXPECT_THROW(calibrate_scores(t, s, ScoreMode::kGroupAware), GroupCoverageError);
}
