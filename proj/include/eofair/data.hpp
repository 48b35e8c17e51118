#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace eofair {

/// Dense row-major matrix of real features.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  /// One-column matrix.
  static FeatureMatrix column(std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }
  double operator()(std::size_t i, std::size_t j) const {
    return values_[i * cols_ + j];
  }
  const std::vector<double>& values() const noexcept { return values_; }

  FeatureMatrix select_rows(std::span<const std::size_t> rows) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// D_n: features, binary sensitive attribute and binary label.
///
/// Invariants (checked on construction): equal row counts n >= 1, values in
/// {0,1}, both sensitive groups non-empty.
class LabeledDataset {
 public:
  LabeledDataset(FeatureMatrix features, std::vector<int> sensitive,
                 std::vector<int> labels,
                 std::vector<std::string> feature_names = {});

  std::size_t size() const noexcept { return features_.rows(); }
  std::size_t dimension() const noexcept { return features_.cols(); }
  const FeatureMatrix& features() const noexcept { return features_; }
  const std::vector<int>& sensitive() const noexcept { return sensitive_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::vector<std::string>& feature_names() const noexcept {
    return feature_names_;
  }
  std::size_t group_size(int s) const noexcept { return group_size_[s]; }

  /// Rows in the given order. Throws GroupCoverageError if a group vanishes.
  LabeledDataset subset(std::span<const std::size_t> rows) const;

 private:
  FeatureMatrix features_;
  std::vector<int> sensitive_;
  std::vector<int> labels_;
  std::vector<std::string> feature_names_;
  std::size_t group_size_[2] = {0, 0};
};

/// D_N: features and, optionally, the sensitive attribute. When the attribute
/// is present each group must hold at least two rows.
class UnlabeledDataset {
 public:
  static constexpr std::size_t kMinGroupRows = 2;

  UnlabeledDataset(FeatureMatrix features,
                   std::optional<std::vector<int>> sensitive,
                   std::vector<std::string> feature_names = {});

  /// Reuse the labeled sample as the unlabeled one (labels dropped).
  static UnlabeledDataset from_labeled(const LabeledDataset& ds);

  std::size_t size() const noexcept { return features_.rows(); }
  std::size_t dimension() const noexcept { return features_.cols(); }
  const FeatureMatrix& features() const noexcept { return features_; }
  bool has_sensitive() const noexcept { return sensitive_.has_value(); }
  /// Throws SchemaError when the attribute is absent.
  const std::vector<int>& sensitive() const;
  const std::vector<std::string>& feature_names() const noexcept {
    return feature_names_;
  }

  UnlabeledDataset subset(std::span<const std::size_t> rows) const;

 private:
  FeatureMatrix features_;
  std::optional<std::vector<int>> sensitive_;
  std::vector<std::string> feature_names_;
};

using Dataset = std::variant<LabeledDataset, UnlabeledDataset>;

/// Header + numeric columns, as read from a CSV file.
struct NumericTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;  // column-major
  std::size_t rows = 0;

  /// Column index or nullopt.
  std::optional<std::size_t> find(const std::string& name) const;
};

/// Parses a comma-separated file with a mandatory header. Every cell must be a
/// finite real; errors name the 1-based data row.
NumericTable read_numeric_csv(const std::filesystem::path& path);

/// Loads a dataset. All columns other than sensitive_col/label_col become
/// features. If label_col is given and present the result is labeled;
/// otherwise unlabeled.
Dataset load_csv(const std::filesystem::path& path,
                 const std::string& sensitive_col,
                 const std::optional<std::string>& label_col);

LabeledDataset load_labeled_csv(const std::filesystem::path& path,
                                const std::string& sensitive_col,
                                const std::string& label_col);

/// `sensitive_required = false` tolerates a missing sensitive column (blind
/// calibration). A label column, when present, is dropped.
UnlabeledDataset load_unlabeled_csv(const std::filesystem::path& path,
                                    const std::string& sensitive_col,
                                    const std::optional<std::string>& label_col,
                                    bool sensitive_required = true);

void write_csv(const LabeledDataset& ds, const std::filesystem::path& path,
               const std::string& sensitive_col = "S",
               const std::string& label_col = "Y");

struct SplitPlan {
  double train_fraction = 0.7;
  std::size_t n_repeats = 30;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Stratification { kSensitiveAndLabel, kSensitiveOnly };

struct SplitIndices {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

struct SplitResult {
  std::vector<SplitIndices> splits;
  Stratification stratification = Stratification::kSensitiveAndLabel;
  /// Set when a (S,Y) cell was too small and the split fell back to S only.
  bool fallback_warning = false;
};

/// Repeated stratified train/test partitions, reproducible from plan.seed.
/// |train| = round(train_fraction * n) and every train part holds both
/// sensitive groups.
SplitResult split(const LabeledDataset& ds, const SplitPlan& plan);

/// Stratified K-fold assignment, cells (S,Y). Each fold is ascending.
std::vector<std::vector<std::size_t>> stratified_folds(const LabeledDataset& ds,
                                                       std::size_t folds,
                                                       std::uint64_t seed);

/// A row order in which every prefix is approximately stratified by (S,Y).
std::vector<std::size_t> stratified_order(const LabeledDataset& ds,
                                          std::uint64_t seed);

/// Complement of `rows` within [0, n), ascending.
std::vector<std::size_t> complement(std::span<const std::size_t> rows,
                                    std::size_t n);

}  // namespace eofair
