#pragma once

// Group-dependent threshold recalibration of probability scores for equal
// opportunity.
//
// Group-aware rule, for a shift theta and estimated joints
// J_s = P(Y = 1, S = s):
//
//   g(x, 1) = 1{ 1 <= score(x, 1) * (2 - theta / J_1) }
//   g(x, 0) = 1{ 1 <= score(x, 0) * (2 + theta / J_0) }
//
// theta is chosen on the unlabeled sample to minimize the score-weighted
// TPR gap (the empirical unfairness), over [-2, 2].
//
// Sensitive-blind rule, with pooled means E_s = mean_x score(x, s):
//
//   g(x) = 1{ 1 <= 2 * score(x) + theta * (score(x, 0) / E_0 - score(x, 1) / E_1) }
//
// Both objectives are piecewise constant in theta. Every switch point is
// snapped to the exact double where the indicator flips, and all sums run
// through kernels::ExactSum, so the O(N log N) profile reproduces a direct
// O(N) evaluation bit for bit.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "eofair/data.hpp"
#include "eofair/estimators.hpp"
#include "eofair/kernels.hpp"

namespace eofair {

struct GroupStatistics {
  std::array<double, 2> p{};           // P(S = s)
  std::array<double, 2> mean_score{};  // E_{X|S=s}[score]
  std::array<double, 2> joint{};       // mean_score * p
  std::array<std::size_t, 2> count{};
};

/// Per-row scores score(x_i, s_i) split by group.
struct GroupScores {
  std::vector<double> group0;
  std::vector<double> group1;

  static GroupScores split(std::span<const double> scores, std::span<const int> sensitive);
  const std::vector<double>& of(int s) const { return s == 1 ? group1 : group0; }
};

/// Throws GroupCoverageError when a group is absent, ValueError when a score
/// is not in (0, 1].
GroupStatistics group_statistics(std::span<const double> scores,
                                 std::span<const int> sensitive);
GroupStatistics group_statistics(const GroupScores& scores);

/// Indicators of the group-aware rule (inclusive "1 <=" boundary).
bool accepts_group1(double score, double theta, double joint1) noexcept;
bool accepts_group0(double score, double theta, double joint0) noexcept;
bool accepts(int s, double score, double theta, const GroupStatistics& stats) noexcept;

/// Largest double theta with accepts_group1(score, theta, joint1).
double group1_switch_point(double score, double joint1);
/// Smallest double theta with accepts_group0(score, theta, joint0).
double group0_switch_point(double score, double joint0);

/// Score-weighted true-positive rate of each group under g_theta.
std::array<double, 2> weighted_tpr(double theta, const GroupScores& scores,
                                   const GroupStatistics& stats);

/// |TPR_1(theta) - TPR_0(theta)| with score weights, by direct summation.
double empirical_unfairness(double theta, const GroupScores& scores,
                            const GroupStatistics& stats);

struct Breakpoint {
  double theta;
  int group;
  std::size_t row;  // index within its group
};

/// Switch points in [lo, hi], sorted by theta then group; duplicates of the
/// same (theta, group) keep the smallest row index.
std::vector<Breakpoint> breakpoints(const GroupScores& scores,
                                    const GroupStatistics& stats, double lo = -2.0,
                                    double hi = 2.0);

/// Sorted switch points with exact prefix sums; evaluates the empirical
/// unfairness at any theta in O(log N).
class UnfairnessProfile {
 public:
  UnfairnessProfile(const GroupScores& scores, const GroupStatistics& stats);

  std::array<double, 2> tpr(double theta) const;
  double operator()(double theta) const;

 private:
  // Group 1 accepts rows whose switch point is >= theta.
  std::vector<double> switch1_;               // ascending
  std::vector<kernels::ExactSum> suffix1_;    // suffix1_[i] = sum over [i, n1)
  // Group 0 accepts rows whose switch point is <= theta.
  std::vector<double> switch0_;               // ascending
  std::vector<kernels::ExactSum> prefix0_;    // prefix0_[i] = sum over [0, i)
  kernels::ExactSum total1_;
  kernels::ExactSum total0_;
};

struct ThetaFit {
  double theta = 0.0;
  double unfairness = 0.0;
  std::size_t candidates = 0;
};

/// Tie-break among equal objective values: smallest |theta|, then smaller theta.
bool better_candidate(double value, double theta, double best_value,
                      double best_theta) noexcept;

/// Exact minimizer of the empirical unfairness over [-2, 2]: evaluates every
/// switch point, the midpoint of each pair of consecutive switch points, 0
/// and +-2.
ThetaFit fit_theta(const GroupScores& scores, const GroupStatistics& stats);

// ---------------------------------------------------------------------------
// Sensitive-blind mode

/// Pooled per-row scores: score(x), score(x, 0), score(x, 1).
struct BlindScores {
  std::vector<double> marginal;
  std::vector<double> group0;
  std::vector<double> group1;

  std::size_t size() const noexcept { return marginal.size(); }
  void validate() const;
};

/// Pooled means E_X[score(X, s)] over the unlabeled sample.
struct BlindDirection {
  double mean0 = 1.0;
  double mean1 = 1.0;

  static BlindDirection from(const BlindScores& scores);
  double at(double score0, double score1) const noexcept {
    return score0 / mean0 - score1 / mean1;
  }
};

bool blind_accepts(double marginal, double direction, double theta) noexcept;

/// Exact switch point of a row with direction != 0: the smallest accepted
/// theta when direction > 0, the largest when direction < 0. Near
/// (1 - 2 * marginal) / direction.
double blind_switch_point(double marginal, double direction);

/// |E[s1 g]/E[s1] - E[s0 g]/E[s0]| over the pooled sample, direct summation.
double blind_unfairness(double theta, const BlindScores& scores,
                        const BlindDirection& direction);

/// Unbounded exact minimizer. Candidates: every finite switch point, the
/// midpoints between consecutive ones, 0, and one point on each outer ray.
ThetaFit fit_theta_blind(const BlindScores& scores);

// ---------------------------------------------------------------------------
// Classifier

class FairClassifier {
 public:
  /// Group-aware classifier.
  FairClassifier(double theta_hat, GroupStatistics stats, double unfairness,
                 std::optional<ScoreModel> model, double floor);
  /// Sensitive-blind classifier; stats are informational and may be absent.
  FairClassifier(double theta_hat, BlindDirection direction, double unfairness,
                 std::optional<GroupStatistics> stats, std::optional<ScoreModel> model,
                 double floor);

  ScoreMode mode() const noexcept { return mode_; }
  double theta_hat() const noexcept { return theta_; }
  /// Empirical unfairness at theta_hat on the calibration sample.
  double unfairness_empirical() const noexcept { return unfairness_; }
  const std::optional<GroupStatistics>& stats() const noexcept { return stats_; }
  const std::optional<BlindDirection>& blind_direction() const noexcept {
    return direction_;
  }
  const std::optional<ScoreModel>& model() const noexcept { return model_; }
  double floor() const noexcept { return floor_; }

  /// Same classifier with a different shift (theta = 0 is the plug-in Bayes
  /// rule).
  FairClassifier with_theta(double theta) const;

  /// Group-aware decision from a floored score.
  int decide(double score, int s) const;
  /// Blind decision from floored scores.
  int decide_blind(double marginal, double score0, double score1) const;

  /// Requires a fitted model. `s` is ignored in blind mode.
  int predict(std::span<const double> x, int s) const;
  std::vector<int> predict_rows(const FeatureMatrix& x,
                                std::span<const int> sensitive) const;
  /// Precomputed scores (floored here). `sensitive` is ignored in blind mode.
  std::vector<int> predict_scores(const ScoreTable& scores,
                                  std::span<const int> sensitive) const;

 private:
  ScoreMode mode_;
  double theta_;
  double unfairness_;
  std::optional<GroupStatistics> stats_;
  std::optional<BlindDirection> direction_;
  std::optional<ScoreModel> model_;
  double floor_;
};

/// Calibrates a fitted model on an unlabeled sample. The model's floor is
/// reset to c_{n,N} for n = model_train_size and N = unlabeled.size().
FairClassifier calibrate_model(const ScoreModel& model, std::size_t model_train_size,
                               const UnlabeledDataset& unlabeled);

/// Fits the estimator on `train` only and computes statistics and theta on
/// the unlabeled sample only. Without an unlabeled sample the train features
/// are reused.
FairClassifier calibrate(const LabeledDataset& train,
                         const std::optional<UnlabeledDataset>& unlabeled,
                         const EstimatorConfig& estimator, ScoreMode mode,
                         double jitter_amplitude = 0.0);

/// Calibration from precomputed scores of the unlabeled sample. Scores are
/// floored at c_{N,N}. `sensitive` is required in group-aware mode.
FairClassifier calibrate_scores(const ScoreTable& scores,
                                const std::optional<std::vector<int>>& sensitive,
                                ScoreMode mode);

}  // namespace eofair
