#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "eofair/error.hpp"
#include "eofair/estimators.hpp"
#include "eofair/oracle.hpp"
#include "eofair/random.hpp"

using namespace eofair;

namespace {

LogisticConfig weak_penalty() {
  LogisticConfig cfg;
  cfg.l2_lambda = 1e-6;
  cfg.max_iters = 20000;
  return cfg;
}

}  // namespace

TEST(Logistic, SeparableToyFitsTraining) {
  // Per group: two points, opposite labels; groups disagree on direction.
  const LabeledDataset ds(FeatureMatrix::column({0.0, 1.0, 0.0, 1.0}), {0, 0, 1, 1},
                          {0, 1, 1, 0});
  const ScoreModel m = fit_logistic(ds, weak_penalty(), ScoreMode::kGroupAware);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int pred = m.raw_score(ds.features().row(i), ds.sensitive()[i]) >= 0.5;
    EXPECT_EQ(pred, ds.labels()[i]) << i;
  }
}

TEST(Logistic, HeavyPenaltyGivesHalf) {
  const LabeledDataset ds(FeatureMatrix::column({0.0, 1.0, 2.0, 0.5, 1.5, 3.0}),
                          {0, 0, 0, 1, 1, 1}, {0, 1, 1, 0, 1, 1});
  LogisticConfig cfg;
  cfg.l2_lambda = 1e8;
  const ScoreModel m = fit_logistic(ds, cfg, ScoreMode::kBlind);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_NEAR(m.raw_score(ds.features().row(i), ds.sensitive()[i]), 0.5, 1e-6);
    EXPECT_NEAR(m.raw_marginal_score(ds.features().row(i)), 0.5, 1e-6);
  }
}

TEST(Logistic, RecoversKnownCoefficients) {
  const std::size_t n = 10000;
  const double w = 1.5;
  const double b = -0.5;
  auto rng = make_rng({2024});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = normal(rng);
    y[i] = uniform01(rng) < sigmoid(w * x[i] + b);
  }
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  const LogisticFit fit =
      fit_logistic_regression(FeatureMatrix::column(x), rows, y, weak_penalty());
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.params.weights[0], w, 0.1 * w);
  EXPECT_NEAR(fit.params.bias, b, 0.1 * std::fabs(b));
  for (std::size_t i = 1; i < fit.loss_history.size(); ++i) {
    ASSERT_LE(fit.loss_history[i], fit.loss_history[i - 1]);
  }
}

TEST(Logistic, NonConvergenceIsFlagged) {
  const SyntheticSample smp = sample(SyntheticDistribution::linear(0.5, 0.1, 0.8, 0.2, 0.7), 200, 1);
  LogisticConfig cfg;
  cfg.max_iters = 1;
  cfg.grad_tolerance = 1e-14;
  const ScoreModel m = fit_logistic(smp.to_labeled(), cfg, ScoreMode::kGroupAware);
  EXPECT_FALSE(m.converged());
}

TEST(Knn, ExactMatchAndFullNeighborhood) {
  const LabeledDataset ds(FeatureMatrix::column({0.0, 1.0, 2.0, 3.0, 0.0, 5.0}),
                          {0, 0, 0, 0, 1, 1}, {1, 0, 0, 1, 0, 1});
  const ScoreModel one = fit_knn(ds, KnnConfig{1}, ScoreMode::kGroupAware);
  const std::vector<double> q{3.0};
  EXPECT_EQ(one.raw_score(q, 0), 1.0);
  const ScoreModel all = fit_knn(ds, KnnConfig{2}, ScoreMode::kGroupAware);
  for (double v : {-10.0, 0.0, 2.5, 40.0}) {
    const std::vector<double> p{v};
    EXPECT_EQ(all.raw_score(p, 1), 0.5);
  }
  EXPECT_THROW(fit_knn(ds, KnnConfig{3}, ScoreMode::kGroupAware), ConfigError);
}

TEST(Knn, TracksAnalyticRegressionFunction) {
  // Steep piecewise-linear eta, mostly near 0 or 1.
  const GroupLaw law0{0.0, 1.0, {{0.0, 0.02}, {0.45, 0.04}, {0.55, 0.96}, {1.0, 0.98}}};
  const GroupLaw law1{0.2, 1.0, {{0.0, 0.03}, {0.4, 0.05}, {0.5, 0.95}, {1.0, 0.97}}};
  const SyntheticDistribution d(0.4, {law0, law1});
  const SyntheticSample train = sample(d, 10000, 11);
  const ScoreModel m = fit_knn(train.to_labeled(), KnnConfig{25}, ScoreMode::kGroupAware);
  const SyntheticSample test = sample(d, 5000, 12);
  double err = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const std::vector<double> x{test.x[i]};
    err += std::fabs(m.raw_score(x, test.s[i]) - d.eta(test.x[i], test.s[i]));
  }
  EXPECT_LE(err / static_cast<double>(test.size()), 0.05);
}

TEST(Floor, Levels) {
  EXPECT_EQ(apply_floor(0.8, 100, 10000), 0.8);
  EXPECT_DOUBLE_EQ(apply_floor(0.0, 100, 10000), 0.1);
  EXPECT_EQ(apply_floor(0.0, 100, 16), 0.49);
  EXPECT_EQ(floor_level(1, 1), 0.49);
}

TEST(ScoreModel, FloorAndJitterAreDeterministic) {
  const SyntheticSample smp = sample(SyntheticDistribution::linear(0.5, 0.0, 1.0, 0.0, 1.0), 400, 4);
  const ScoreModel base = fit_knn(smp.to_labeled(), KnnConfig{5}, ScoreMode::kGroupAware);
  const ScoreModel floored = base.with_floor(0.3);
  const ScoreModel jittered = floored.with_jitter(1e-7);
  bool any_moved = false;
  for (std::size_t i = 0; i < 50; ++i) {
    const std::vector<double> x{smp.x[i]};
    const double f = floored.score(x, smp.s[i]);
    EXPECT_GE(f, 0.3);
    EXPECT_LE(f, 1.0);
    EXPECT_LE(f - base.raw_score(x, smp.s[i]), 0.3);
    const double j = jittered.score(x, smp.s[i]);
    EXPECT_EQ(j, jittered.score(x, smp.s[i]));
    EXPECT_LE(std::fabs(j - f), 1e-7 + 1e-16);
    any_moved = any_moved || j != f;
  }
  EXPECT_TRUE(any_moved);
}

TEST(ScoreModel, DimensionChecked) {
  const LabeledDataset ds(FeatureMatrix::column({0.0, 1.0, 0.0, 1.0}), {0, 0, 1, 1},
                          {0, 1, 1, 0});
  const ScoreModel m = fit_logistic(ds, LogisticConfig{}, ScoreMode::kGroupAware);
  const std::vector<double> wrong{1.0, 2.0};
  EXPECT_THROW(m.score(wrong, 0), SchemaError);
}

TEST(ScoreFile, RoundTrip) {
  ScoreTable t;
  t.s0 = {0.1, 0.123456789012345, 1.0};
  t.s1 = {0.9, 0.5, 1e-6};
  t.marginal = std::vector<double>{0.3, 0.4, 0.5};
  const auto path = std::filesystem::temp_directory_path() / "eofair_scores_rt.csv";
  write_score_file(t, path);
  const ScoreTable back = read_score_file(path);
  ASSERT_EQ(back.size(), 3u);
  ASSERT_TRUE(back.marginal.has_value());
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.s0[i], t.s0[i]);
    EXPECT_EQ(back.s1[i], t.s1[i]);
    EXPECT_EQ((*back.marginal)[i], (*t.marginal)[i]);
  }
  EXPECT_EQ(t.own_group(std::vector<int>{1, 0, 1}), (std::vector<double>{0.9, 0.123456789012345, 1e-6}));
  EXPECT_EQ(t.floored(0.2).s1[2], 0.2);
}

TEST(ScoreFile, RejectsOutOfRange) {
  const auto path = std::filesystem::temp_directory_path() / "eofair_scores_bad.csv";
  std::ofstream(path) << "score_s0,score_s1\n0.5,1.5\n";
  EXPECT_THROW(read_score_file(path), ValueError);
}
