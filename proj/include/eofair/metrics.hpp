#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>

namespace eofair {

struct EvaluationReport {
  double accuracy = 0.0;
  /// |tpr_1 - tpr_0|; absent when a group has no positive label.
  std::optional<double> deo;
  std::array<std::optional<double>, 2> tpr;
  std::array<std::size_t, 2> n_positives{};
  std::size_t n = 0;

  bool deo_undefined() const noexcept { return !deo.has_value(); }
  /// CV convention: an undefined DEO counts as 0.
  double deo_or_zero() const noexcept { return deo.value_or(0.0); }
};

/// Fraction of matching entries. Throws SchemaError on length mismatch or
/// empty input.
double accuracy(std::span<const int> pred, std::span<const int> labels);

/// Test-set TPR gap. Never throws for missing positives; sets the flag instead.
EvaluationReport deo(std::span<const int> pred, std::span<const int> labels,
                     std::span<const int> sensitive);

/// accuracy + deo.
EvaluationReport evaluate(std::span<const int> pred, std::span<const int> labels,
                          std::span<const int> sensitive);

}  // namespace eofair
