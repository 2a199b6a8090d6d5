// Serial reference kernels against their OpenMP counterparts.

#include "convexreg/kernels.hpp"
#include "convexreg/seeding.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace convexreg;

namespace {

PointMatrix uniform(int rows, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return PointMatrix::NullaryExpr(rows, d, [&] { return u(rng); });
}

// Fitted values and slopes of |x|^2 with a little noise: mostly feasible.
struct Fit {
  PointMatrix x;
  Vector theta;
  PointMatrix g;
};

Fit noisy_fit(int n, int d) {
  Fit f{uniform(n, d, 1), Vector(), PointMatrix()};
  Rng rng(2);
  std::normal_distribution<double> noise(0.0, 1e-3);
  f.theta = f.x.rowwise().squaredNorm();
  for (int i = 0; i < n; ++i) f.theta[i] += noise(rng);
  f.g = 2.0 * f.x;
  return f;
}

template <bool Parallel>
void BM_max_affine(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const PointMatrix slopes = uniform(256, 3, 3);
  const Vector intercepts = uniform(256, 1, 4).col(0);
  const PointMatrix points = uniform(m, 3, 5);
  Vector out;
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::max_affine(slopes, intercepts, points, out);
    } else {
      kernels::serial::max_affine(slopes, intercepts, points, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * m * 256);
}

template <bool Parallel>
void BM_max_pair_violation(benchmark::State& state) {
  const Fit f = noisy_fit(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) {
    double v = Parallel ? kernels::parallel::max_pair_violation(f.x, f.theta, f.g)
                        : kernels::serial::max_pair_violation(f.x, f.theta, f.g);
    benchmark::DoNotOptimize(v);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

template <bool Parallel>
void BM_scan_violations(benchmark::State& state) {
  const Fit f = noisy_fit(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) {
    auto v = Parallel ? kernels::parallel::scan_violations(f.x, f.theta, f.g, 0.0, 8)
                      : kernels::serial::scan_violations(f.x, f.theta, f.g, 0.0, 8);
    benchmark::DoNotOptimize(v.data());
  }
}

template <bool Parallel>
void BM_nearest_neighbors(benchmark::State& state) {
  const PointMatrix x = uniform(static_cast<int>(state.range(0)), 3, 6);
  for (auto _ : state) {
    auto nn = Parallel ? kernels::parallel::nearest_neighbors(x, 8) : kernels::serial::nearest_neighbors(x, 8);
    benchmark::DoNotOptimize(nn.data());
  }
}

}  // namespace

BENCHMARK(BM_max_affine<false>)->Name("max_affine/serial")->Arg(1 << 12)->Arg(1 << 15);
BENCHMARK(BM_max_affine<true>)->Name("max_affine/parallel")->Arg(1 << 12)->Arg(1 << 15);
BENCHMARK(BM_max_pair_violation<false>)->Name("max_pair_violation/serial")->Arg(500)->Arg(2000);
BENCHMARK(BM_max_pair_violation<true>)->Name("max_pair_violation/parallel")->Arg(500)->Arg(2000);
BENCHMARK(BM_scan_violations<false>)->Name("scan_violations/serial")->Arg(500)->Arg(2000);
BENCHMARK(BM_scan_violations<true>)->Name("scan_violations/parallel")->Arg(500)->Arg(2000);
BENCHMARK(BM_nearest_neighbors<false>)->Name("nearest_neighbors/serial")->Arg(500)->Arg(2000);
BENCHMARK(BM_nearest_neighbors<true>)->Name("nearest_neighbors/parallel")->Arg(500)->Arg(2000);

BENCHMARK_MAIN();
