#include "eofair/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <utility>

#include "eofair/error.hpp"

namespace eofair::kernels {

namespace {

constexpr std::size_t kSimpsonChunks = 64;

double simpson_weight(std::size_t i, std::size_t intervals) {
  if (i == 0 || i == intervals) return 1.0;
  return (i % 2 == 1) ? 4.0 : 2.0;
}

void check_simpson(double a, double b, std::size_t intervals) {
  if (intervals == 0 || intervals % 2 != 0) {
    throw NumericError("simpson: interval count must be positive and even");
  }
  if (!(b >= a)) throw NumericError("simpson: empty or reversed range");
}

}  // namespace

Int128 ExactSum::to_fixed(double x) noexcept {
  if (x == 0.0 || !std::isfinite(x)) return 0;
  int exponent = 0;
  const double mantissa = std::frexp(std::fabs(x), &exponent);
  const auto digits = static_cast<std::int64_t>(std::ldexp(mantissa, 53));
  const int shift = exponent - 53 + kFractionBits;
  Int128 v = digits;
  if (shift >= 0) {
    v <<= shift;
  } else if (shift > -127) {
    v >>= -shift;
  } else {
    v = 0;
  }
  return x < 0 ? -v : v;
}

double ExactSum::value() const noexcept {
  return std::ldexp(static_cast<double>(acc_), -kFractionBits);
}

ExactSum exact_sum(std::span<const double> values) {
  // Integer addition is associative, so the reduction order is irrelevant.
  Int128 total = 0;
  const auto n = static_cast<std::int64_t>(values.size());
#pragma omp parallel
  {
    Int128 local = 0;
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) local += ExactSum::to_fixed(values[i]);
#pragma omp critical
    total += local;
  }
  return ExactSum::from_fixed(total);
}

double simpson(const std::function<double(double)>& f, double a, double b,
               std::size_t intervals) {
  check_simpson(a, b, intervals);
  const double h = (b - a) / static_cast<double>(intervals);
  const std::size_t points = intervals + 1;
  const std::size_t chunk = (points + kSimpsonChunks - 1) / kSimpsonChunks;
  std::vector<double> partial(kSimpsonChunks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < static_cast<std::int64_t>(kSimpsonChunks); ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * chunk;
    const std::size_t hi = std::min(points, lo + chunk);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double x = (i == intervals) ? b : a + static_cast<double>(i) * h;
      acc += simpson_weight(i, intervals) * f(x);
    }
    partial[static_cast<std::size_t>(c)] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total * h / 3.0;
}

double knn_query(const FeatureMatrix& reference,
                 std::span<const std::size_t> reference_rows,
                 std::span<const int> labels, std::span<const double> query,
                 std::size_t k) {
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(reference_rows.size());
  for (std::size_t r : reference_rows) {
    const auto row = reference.row(r);
    double d = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double diff = row[j] - query[j];
      d += diff * diff;
    }
    dist.emplace_back(d, r);
  }
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   dist.end());
  std::size_t positives = 0;
  for (std::size_t i = 0; i < k; ++i) positives += labels[dist[i].second] == 1;
  return static_cast<double>(positives) / static_cast<double>(k);
}

std::vector<double> knn_positive_fraction(const FeatureMatrix& reference,
                                          std::span<const std::size_t> reference_rows,
                                          std::span<const int> labels,
                                          const FeatureMatrix& queries,
                                          std::size_t k) {
  if (k == 0 || k > reference_rows.size()) {
    throw ConfigError("k-NN: k=" + std::to_string(k) + " with " +
                      std::to_string(reference_rows.size()) + " reference rows");
  }
  std::vector<double> out(queries.rows());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t q = 0; q < static_cast<std::int64_t>(queries.rows()); ++q) {
    out[static_cast<std::size_t>(q)] =
        knn_query(reference, reference_rows, labels,
                  queries.row(static_cast<std::size_t>(q)), k);
  }
  return out;
}

std::vector<double> map(std::span<const double> points,
                        const std::function<double(double)>& f) {
  std::vector<double> out(points.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(points.size()); ++i) {
    out[static_cast<std::size_t>(i)] = f(points[static_cast<std::size_t>(i)]);
  }
  return out;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

namespace serial {

ExactSum exact_sum(std::span<const double> values) {
  ExactSum s;
  for (double v : values) s.add(v);
  return s;
}

double simpson(const std::function<double(double)>& f, double a, double b,
               std::size_t intervals) {
  check_simpson(a, b, intervals);
  const double h = (b - a) / static_cast<double>(intervals);
  double acc = 0.0;
  for (std::size_t i = 0; i <= intervals; ++i) {
    const double x = (i == intervals) ? b : a + static_cast<double>(i) * h;
    acc += simpson_weight(i, intervals) * f(x);
  }
  return acc * h / 3.0;
}

std::vector<double> knn_positive_fraction(const FeatureMatrix& reference,
                                          std::span<const std::size_t> reference_rows,
                                          std::span<const int> labels,
                                          const FeatureMatrix& queries,
                                          std::size_t k) {
  if (k == 0 || k > reference_rows.size()) {
    throw ConfigError("k-NN: k=" + std::to_string(k) + " with " +
                      std::to_string(reference_rows.size()) + " reference rows");
  }
  std::vector<double> out;
  out.reserve(queries.rows());
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    out.push_back(knn_query(reference, reference_rows, labels, queries.row(q), k));
  }
  return out;
}

std::vector<double> map(std::span<const double> points,
                        const std::function<double(double)>& f) {
  std::vector<double> out;
  out.reserve(points.size());
  for (double p : points) out.push_back(f(p));
  return out;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  for (std::size_t i = 0; i < count; ++i) body(i);
}

}  // namespace serial

}  // namespace eofair::kernels
