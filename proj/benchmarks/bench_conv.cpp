#include <benchmark/benchmark.h>

#include <random>

#include "andikit/network.hpp"

using namespace andikit;

namespace {
ad::TensorPtr<float> randn(ad::Shape shape, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> g;
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<float> v(n);
  for (auto& x : v) x = g(rng);
  return ad::make_tensor<float>(shape, v);
}
}  // namespace

static void BM_Conv1dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  auto x = randn({16, c, 250}, 1);
  auto w = randn({c, c, 3}, 2);
  for (auto _ : state) {
    ad::Tape<float> tape(false);
    benchmark::DoNotOptimize(ad::conv1d(tape, x, w, 1, 1));
  }
}
BENCHMARK(BM_Conv1dForward)->Arg(16)->Arg(64)->Arg(128);

static void BM_Conv1dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  auto x = randn({16, c, 250}, 3);
  auto w = randn({c, c, 3}, 4);
  x->requires_grad = true;
  w->requires_grad = true;
  for (auto _ : state) {
    ad::Tape<float> tape;
    auto y = ad::sum(tape, ad::conv1d(tape, x, w, 1, 1));
    tape.backward(y);
  }
}
BENCHMARK(BM_Conv1dBackward)->Arg(16)->Arg(64);

static void BM_ResAnDiEvalForward(benchmark::State& state) {
  net::ModelConfig cfg;
  cfg.input_len = 200;
  cfg.scale = 0.5;
  net::ResAnDi<float> model(cfg, 1);
  auto x = randn({32, 2, 200}, 5);
  for (auto _ : state) {
    ad::Tape<float> tape(false);
    benchmark::DoNotOptimize(model.forward(tape, x, ad::Mode::Eval));
  }
}
BENCHMARK(BM_ResAnDiEvalForward)->Unit(benchmark::kMillisecond);
