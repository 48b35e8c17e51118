#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP implementation and a
// serial reference under kernels::serial; tests hold the two to agreement and
// bench/ compares their speed.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "eofair/data.hpp"

namespace eofair::kernels {

__extension__ typedef __int128 Int128;

/// Order-independent sum of non-negative reals below 2^40.
///
/// Each term is converted to a signed 128-bit fixed-point integer with 80
/// fractional bits, so sums are exact for every term >= 2^-27 and the result
/// does not depend on summation order or thread count.
class ExactSum {
 public:
  static constexpr int kFractionBits = 80;

  ExactSum() = default;

  void add(double x) noexcept { acc_ += to_fixed(x); }
  ExactSum& operator+=(const ExactSum& other) noexcept {
    acc_ += other.acc_;
    return *this;
  }
  friend ExactSum operator-(ExactSum a, const ExactSum& b) noexcept {
    a.acc_ -= b.acc_;
    return a;
  }
  friend bool operator==(const ExactSum& a, const ExactSum& b) noexcept {
    return a.acc_ == b.acc_;
  }

  /// Correctly rounded double of the fixed-point total.
  double value() const noexcept;

  static Int128 to_fixed(double x) noexcept;

  static ExactSum from_fixed(Int128 raw) noexcept {
    ExactSum s;
    s.acc_ = raw;
    return s;
  }
  Int128 fixed() const noexcept { return acc_; }

 private:
  Int128 acc_ = 0;
};

ExactSum exact_sum(std::span<const double> values);

/// Composite Simpson rule on [a, b] with `intervals` (even) subintervals.
/// Chunked reduction with a fixed chunk layout: deterministic for any thread
/// count.
double simpson(const std::function<double(double)>& f, double a, double b,
               std::size_t intervals);

/// Fraction of positive labels among the k nearest reference rows of each
/// query (squared Euclidean distance, ties to the smaller reference index).
/// `reference_rows` selects rows of `reference`; `labels` is indexed like
/// `reference`.
std::vector<double> knn_positive_fraction(const FeatureMatrix& reference,
                                          std::span<const std::size_t> reference_rows,
                                          std::span<const int> labels,
                                          const FeatureMatrix& queries,
                                          std::size_t k);

/// Evaluates `f` at every point, in parallel. Results are in input order.
std::vector<double> map(std::span<const double> points,
                        const std::function<double(double)>& f);

/// Runs body(i) for i in [0, count) in parallel. The first exception thrown
/// by any iteration is rethrown after the loop.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

namespace serial {

ExactSum exact_sum(std::span<const double> values);

double simpson(const std::function<double(double)>& f, double a, double b,
               std::size_t intervals);

std::vector<double> knn_positive_fraction(const FeatureMatrix& reference,
                                          std::span<const std::size_t> reference_rows,
                                          std::span<const int> labels,
                                          const FeatureMatrix& queries,
                                          std::size_t k);

std::vector<double> map(std::span<const double> points,
                        const std::function<double(double)>& f);

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace serial

/// Positive-label fraction for a single query; shared by both kNN kernels.
double knn_query(const FeatureMatrix& reference,
                 std::span<const std::size_t> reference_rows,
                 std::span<const int> labels, std::span<const double> query,
                 std::size_t k);

}  // namespace eofair::kernels
