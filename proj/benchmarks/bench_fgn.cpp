#include <benchmark/benchmark.h>

#include "andikit/trajgen.hpp"

using namespace andikit::traj;

static void BM_FgnCirculant(benchmark::State& state) {
  Rng rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fractional_gaussian_noise(0.35, n, rng, FgnMethod::Circulant));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FgnCirculant)->RangeMultiplier(4)->Range(256, 16384)->Complexity();

static void BM_FgnHosking(benchmark::State& state) {
  Rng rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fractional_gaussian_noise(0.35, n, rng, FgnMethod::Hosking));
}
BENCHMARK(BM_FgnHosking)->Arg(256)->Arg(1024);

static void BM_GenTrajectory(benchmark::State& state) {
  Rng rng(2);
  const auto m = static_cast<Mechanism>(state.range(0));
  // indices 0-3 subdiffusive, 4-6 superdiffusive, 7 Brownian
  const double alpha = state.range(0) < 4 ? 0.7 : state.range(0) < 7 ? 1.5 : 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(gen_trajectory(m, alpha, 1000, rng));
}
BENCHMARK(BM_GenTrajectory)->DenseRange(0, 7);
