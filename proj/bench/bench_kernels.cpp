// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS set to the
// thread count of interest.

#include <benchmark/benchmark.h>

#include <cmath>
#include <numeric>

#include "eofair/kernels.hpp"
#include "eofair/random.hpp"

namespace {

using namespace eofair;

std::vector<double> values(std::size_t n) {
  auto rng = make_rng({42, n});
  std::vector<double> v(n);
  for (auto& x : v) x = uniform01(rng);
  return v;
}

double integrand(double x) { return std::exp(-x * x) * std::sin(3.0 * x); }

struct KnnInput {
  FeatureMatrix reference;
  FeatureMatrix queries;
  std::vector<int> labels;
  std::vector<std::size_t> rows;
};

KnnInput knn_input(std::size_t n) {
  constexpr std::size_t kDim = 4;
  auto rng = make_rng({7, n});
  std::vector<double> ref(n * kDim);
  std::vector<double> q(1000 * kDim);
  std::vector<int> labels(n);
  for (auto& x : ref) x = uniform01(rng);
  for (auto& x : q) x = uniform01(rng);
  for (auto& y : labels) y = uniform01(rng) < 0.5;
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return {FeatureMatrix(n, kDim, ref), FeatureMatrix(1000, kDim, q), labels, rows};
}

void BM_ExactSumSerial(benchmark::State& state) {
  const auto v = values(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::exact_sum(v).value());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ExactSumParallel(benchmark::State& state) {
  const auto v = values(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::exact_sum(v).value());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SimpsonSerial(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::simpson(integrand, 0.0, 2.0, m));
}

void BM_SimpsonParallel(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::simpson(integrand, 0.0, 2.0, m));
}

void BM_KnnSerial(benchmark::State& state) {
  const KnnInput in = knn_input(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        kernels::serial::knn_positive_fraction(in.reference, in.rows, in.labels, in.queries, 25));
  }
}

void BM_KnnParallel(benchmark::State& state) {
  const KnnInput in = knn_input(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        kernels::knn_positive_fraction(in.reference, in.rows, in.labels, in.queries, 25));
  }
}

void BM_MapSerial(benchmark::State& state) {
  const auto v = values(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::map(v, integrand));
}

void BM_MapParallel(benchmark::State& state) {
  const auto v = values(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::map(v, integrand));
}

}  // namespace

BENCHMARK(BM_ExactSumSerial)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_ExactSumParallel)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_SimpsonSerial)->Arg(1 << 17);
BENCHMARK(BM_SimpsonParallel)->Arg(1 << 17);
BENCHMARK(BM_KnnSerial)->Arg(2000)->Arg(10000);
BENCHMARK(BM_KnnParallel)->Arg(2000)->Arg(10000);
BENCHMARK(BM_MapSerial)->Arg(1 << 18);
BENCHMARK(BM_MapParallel)->Arg(1 << 18);

BENCHMARK_MAIN();
