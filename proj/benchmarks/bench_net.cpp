#include <benchmark/benchmark.h>

#include <vector>

#include "declab/net.hpp"
#include "declab/rng.hpp"

using namespace declab;

static void BM_MlpForwardEval(benchmark::State& state) {
  auto init = rng::Root(11).stream("bench-init");
  net::MlpSpec spec;
  spec.dims = {3, static_cast<int>(state.range(0)),
               static_cast<int>(state.range(0)), 4};
  net::Mlp mlp(spec, init);
  std::vector<double> x = {0.4, -0.2, 0.9};
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp.forward(x));
  }
}
BENCHMARK(BM_MlpForwardEval)->Arg(16)->Arg(32)->Arg(64);

static void BM_MlpForwardBackward(benchmark::State& state) {
  auto init = rng::Root(12).stream("bench-init");
  net::MlpSpec spec;
  spec.dims = {3, static_cast<int>(state.range(0)),
               static_cast<int>(state.range(0)), 4};
  net::Mlp mlp(spec, init);
  std::vector<double> x = {0.4, -0.2, 0.9};
  std::vector<double> upstream = {1.0, -1.0, 0.5, 0.25};
  std::vector<double> grads(mlp.param_count(), 0.0);
  for (auto _ : state) {
    net::ForwardCache cache;
    benchmark::DoNotOptimize(mlp.forward(x, cache, false));
    mlp.backward(cache, upstream, grads);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_MlpForwardBackward)->Arg(16)->Arg(32)->Arg(64);

static void BM_AdamStep(benchmark::State& state) {
  auto init = rng::Root(13).stream("bench-init");
  net::MlpSpec spec;
  spec.dims = {3, 32, 32, 4};
  net::Mlp mlp(spec, init);
  net::AdamState opt(mlp.param_count(), net::AdamConfig{});
  std::vector<double> grads(mlp.param_count(), 1e-3);
  for (auto _ : state) {
    opt.step(mlp.params(), grads);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_AdamStep);
