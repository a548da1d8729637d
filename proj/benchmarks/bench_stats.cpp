#include <benchmark/benchmark.h>

#include "andikit/stats.hpp"
#include "andikit/trajgen.hpp"

using namespace andikit;

static void BM_WindowStats(benchmark::State& state) {
  traj::Rng rng(3);
  const auto t = traj::gen_trajectory(traj::Mechanism::SubFBM, 0.5, 1000, rng);
  const std::size_t w = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    for (std::size_t s = 0; s + w <= 1000; s += 25)
      benchmark::DoNotOptimize(stats::window_stats(std::span(t.positions).subspan(s, w), 4));
  }
}
BENCHMARK(BM_WindowStats)->Arg(100)->Arg(225);

static void BM_Pearson(benchmark::State& state) {
  traj::Rng rng(4);
  std::vector<double> x(state.range(0)), y(state.range(0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = traj::standard_normal(rng);
    y[i] = x[i] + traj::standard_normal(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(stats::pearson(x, y));
}
BENCHMARK(BM_Pearson)->Arg(1 << 12)->Arg(1 << 16);
