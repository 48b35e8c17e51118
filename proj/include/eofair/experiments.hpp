#pragma once

// Repeated-split benchmark with two-step cross-validated model selection, and
// the unlabeled-size sweep.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eofair/calibration.hpp"
#include "eofair/data.hpp"
#include "eofair/estimators.hpp"
#include "eofair/metrics.hpp"

namespace eofair {

/// 30 values log-spaced over [1e-4, 1e4].
std::vector<double> default_lambda_grid();
/// {1, 3, 5, ..., 51}.
std::vector<std::size_t> default_k_grid();

struct UnlabeledSource {
  enum class Kind { kReuse, kFile, kFraction };
  Kind kind = Kind::kReuse;
  std::filesystem::path path;  // kFile
  double fraction = 0.0;       // kFraction: share of each train split held out as D_N
};

struct BenchmarkConfig {
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> test_set;
  std::string sensitive_col = "S";
  std::string label_col = "Y";
  std::string estimator = "logistic";  // "logistic" | "knn"
  std::vector<double> lambda_grid = default_lambda_grid();
  std::vector<std::size_t> k_grid = default_k_grid();
  LogisticConfig logistic;  // optimizer settings; l2_lambda comes from the grid
  SplitPlan split;
  std::size_t cv_folds = 10;
  double shortlist_fraction = 0.9;
  ScoreMode mode = ScoreMode::kGroupAware;
  UnlabeledSource unlabeled;

  void validate() const;
  std::vector<EstimatorConfig> grid() const;
  std::string hyperparameter_name() const;
  double hyperparameter_value(std::size_t index) const;
};

/// The two evaluated methods: the recalibrated classifier and the plug-in
/// Bayes rule at theta = 0.
enum Arm : std::size_t { kPlugin = 0, kBaseline = 1 };
inline constexpr std::array<const char*, 2> kArmNames{"plugin", "baseline"};

struct CvCell {
  double hyperparameter = 0.0;
  std::array<double, 2> accuracy{};  // per arm
  std::array<double, 2> deo{};       // per arm, undefined folds count as 0
  std::size_t folds_used = 0;
  std::size_t folds_deo_undefined = 0;
};

struct ArmOutcome {
  std::size_t chosen_index = 0;
  double chosen_hyperparameter = 0.0;
  EvaluationReport test;
  double theta = 0.0;
};

struct RepeatOutcome {
  std::size_t repeat = 0;
  std::size_t n_labeled = 0;
  std::size_t n_unlabeled = 0;
  std::size_t n_test = 0;
  double theta_hat = 0.0;  // plugin arm
  std::array<ArmOutcome, 2> arms;
  std::vector<CvCell> cv;
  std::vector<std::string> warnings;
};

struct ArmSummary {
  double acc_mean = 0.0;
  double deo_mean = 0.0;
  std::optional<double> acc_std;  // absent with a fixed test set
  std::optional<double> deo_std;
  std::size_t deo_undefined = 0;
};

struct BenchmarkReport {
  std::string hyperparameter_name;
  std::string estimator;
  ScoreMode mode = ScoreMode::kGroupAware;
  Stratification split_stratification = Stratification::kSensitiveAndLabel;
  bool split_fallback_warning = false;
  bool fixed_test_set = false;
  std::array<ArmSummary, 2> arms;
  std::vector<RepeatOutcome> repeats;
};

/// In-memory inputs of a benchmark.
struct BenchmarkData {
  LabeledDataset dataset;
  std::optional<LabeledDataset> test_set;
  std::optional<UnlabeledDataset> unlabeled;  // UnlabeledSource::kFile
};

BenchmarkData load_benchmark_data(const BenchmarkConfig& cfg);

/// Two-step selection: CV over the grid on `labeled` (reuse-train calibration
/// inside each fold), shortlist {h : acc(h) >= fraction * max acc}, lowest
/// DEO in the shortlist, ties to higher accuracy then grid order. Returns
/// the chosen grid index per arm.
std::array<std::size_t, 2> select_hyperparameters(const LabeledDataset& labeled,
                                                  const BenchmarkConfig& cfg,
                                                  std::uint64_t seed,
                                                  std::vector<CvCell>& cv,
                                                  std::vector<std::string>& warnings);

/// Index of the chosen cell for one arm, given averaged CV results.
std::size_t shortlist_choice(const std::vector<CvCell>& cv, std::size_t arm,
                             double shortlist_fraction);

/// Fits on `labeled`, calibrates on `unlabeled`, evaluates on `test`. The
/// baseline arm reuses the same model with theta = 0.
struct ArmEvaluation {
  EvaluationReport plugin;
  EvaluationReport baseline;
  double theta_hat = 0.0;
  double unfairness = 0.0;
};
ArmEvaluation evaluate_arms(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                            const LabeledDataset& test, const EstimatorConfig& estimator,
                            ScoreMode mode);

BenchmarkReport run_benchmark(const BenchmarkData& data, const BenchmarkConfig& cfg);
BenchmarkReport run_benchmark(const BenchmarkConfig& cfg);

struct SweepConfig {
  BenchmarkConfig base;  // dataset, columns, estimator grid, CV settings, mode
  double labeled_fraction = 0.1;
  std::vector<double> unlabeled_fractions{0.0, 0.1, 0.2, 0.4, 0.8};
  std::size_t repeats = 30;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SweepRow {
  double fraction = 0.0;
  std::size_t n_unlabeled = 0;
  std::array<ArmSummary, 2> arms;
  std::vector<double> plugin_deo;  // per repeat
  std::vector<double> plugin_acc;
};

struct SweepReport {
  std::size_t n_labeled = 0;
  std::size_t n_test = 0;
  std::vector<SweepRow> rows;
  std::vector<std::string> warnings;
};

/// Per repeat: a stratified row order splits the data into the labeled part
/// (first round(labeled_fraction * n) rows), an unlabeled pool, and the test
/// part (rows after the largest pool). Unlabeled sets are nested prefixes of
/// the pool; fraction 0 reuses the labeled features.
SweepReport run_unlabeled_sweep(const LabeledDataset& data, const SweepConfig& cfg);
SweepReport run_unlabeled_sweep(const SweepConfig& cfg);

}  // namespace eofair
