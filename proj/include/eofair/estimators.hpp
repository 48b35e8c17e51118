#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "eofair/data.hpp"

namespace eofair {

enum class ScoreMode { kGroupAware, kBlind };

struct LogisticConfig {
  double l2_lambda = 1e-4;
  int max_iters = 5000;
  double grad_tolerance = 1e-6;
  // Backtracking line search.
  double initial_step = 4.0;
  double shrink = 0.5;
  double armijo = 1e-4;

  void validate() const;
};

struct KnnConfig {
  std::size_t k = 5;

  void validate() const;
};

using EstimatorConfig = std::variant<LogisticConfig, KnnConfig>;

/// Weights and bias on the raw feature scale.
struct LogisticParams {
  std::vector<double> weights;
  double bias = 0.0;
};

/// Stored reference sample for neighbor queries.
struct KnnParams {
  std::size_t k = 1;
  FeatureMatrix points;
  std::vector<int> labels;
};

using Regressor = std::variant<LogisticParams, KnnParams>;

/// Output of a single regularized logistic regression fit.
struct LogisticFit {
  LogisticParams params;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  /// Objective after every accepted step (first entry: initial point).
  std::vector<double> loss_history;
};

/// Minimizes mean log-loss + (lambda/2)(|w|^2 + b^2) over standardized
/// features by full-batch gradient descent with Armijo backtracking. The
/// returned parameters are mapped back to the raw feature scale.
LogisticFit fit_logistic_regression(const FeatureMatrix& features,
                                    std::span<const std::size_t> rows,
                                    std::span<const int> labels,
                                    const LogisticConfig& cfg);

double sigmoid(double z) noexcept;

/// Floor level c_{n,N} = N^{-1/4}, clamped to [1e-6, 0.49].
double floor_level(std::size_t n, std::size_t N);

/// max(raw_score, c_{n,N}).
double apply_floor(double raw_score, std::size_t n, std::size_t N);

/// Estimator of the regression function eta(x, s) (and, in blind mode, of the
/// marginal eta(x)). Scores are floored and optionally jittered; scoring is a
/// pure function of the parameters and the input row.
class ScoreModel {
 public:
  ScoreModel(ScoreMode mode, std::array<Regressor, 2> per_group,
             std::optional<Regressor> marginal, double floor,
             double jitter_amplitude, bool converged);

  ScoreMode mode() const noexcept { return mode_; }
  double floor() const noexcept { return floor_; }
  double jitter_amplitude() const noexcept { return jitter_; }
  bool converged() const noexcept { return converged_; }
  std::size_t dimension() const noexcept { return dimension_; }
  const Regressor& group_regressor(int s) const { return per_group_[s]; }
  const std::optional<Regressor>& marginal_regressor() const noexcept {
    return marginal_;
  }

  ScoreModel with_floor(double floor) const;
  ScoreModel with_jitter(double amplitude) const;

  /// Unfloored estimate of eta(x, s) in [0, 1].
  double raw_score(std::span<const double> x, int s) const;
  /// Floored (and jittered) estimate, in [floor, 1].
  double score(std::span<const double> x, int s) const;

  /// Blind mode only: estimate of eta(x).
  double raw_marginal_score(std::span<const double> x) const;
  double marginal_score(std::span<const double> x) const;

  /// score(x_i, s_i) for every row.
  std::vector<double> score_rows(const FeatureMatrix& x,
                                 std::span<const int> sensitive) const;
  /// score(x_i, s) for every row and a fixed s.
  std::vector<double> score_rows_as_group(const FeatureMatrix& x, int s) const;
  std::vector<double> marginal_scores(const FeatureMatrix& x) const;

 private:
  double finish(double raw, std::span<const double> x, int tag) const;
  std::vector<double> batch(const Regressor& r, const FeatureMatrix& x) const;

  ScoreMode mode_;
  std::array<Regressor, 2> per_group_;
  std::optional<Regressor> marginal_;
  double floor_;
  double jitter_;
  bool converged_;
  std::size_t dimension_ = 0;
};

/// Group-aware: one logistic model per sensitive group. Blind: the per-group
/// models plus a marginal model on all rows.
ScoreModel fit_logistic(const LabeledDataset& train, const LogisticConfig& cfg,
                        ScoreMode mode);

/// Neighbors are searched within the same sensitive group; the blind marginal
/// searches all rows. Throws ConfigError if k exceeds a group size.
ScoreModel fit_knn(const LabeledDataset& train, const KnnConfig& cfg, ScoreMode mode);

ScoreModel fit_estimator(const LabeledDataset& train, const EstimatorConfig& cfg,
                         ScoreMode mode);

/// Precomputed scores, row-aligned with a dataset. Columns score_s0,
/// score_s1 and (blind mode) score_marginal.
struct ScoreTable {
  std::vector<double> s0;
  std::vector<double> s1;
  std::optional<std::vector<double>> marginal;

  std::size_t size() const noexcept { return s0.size(); }
  /// Picks score_s{s_i} per row.
  std::vector<double> own_group(std::span<const int> sensitive) const;
  ScoreTable floored(double floor) const;
};

ScoreTable read_score_file(const std::filesystem::path& path);
void write_score_file(const ScoreTable& scores, const std::filesystem::path& path);

/// Scores of every row under both group models (and the marginal, if any).
ScoreTable score_table(const ScoreModel& model, const FeatureMatrix& x);

}  // namespace eofair
