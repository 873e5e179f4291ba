#include <benchmark/benchmark.h>

#include <vector>

#include "declab/actions.hpp"
#include "declab/categorical.hpp"
#include "declab/rng.hpp"

using namespace declab;

namespace {

categorical::Logits random_logits(int vocab, std::uint64_t seed) {
  auto stream = rng::Root(seed).stream("bench-logits");
  std::vector<double> z(static_cast<size_t>(vocab));
  for (double& v : z) v = 4.0 * stream.next_gaussian();
  return categorical::Logits(std::move(z));
}

}  // namespace

static void BM_Softmax(benchmark::State& state) {
  auto logits = random_logits(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(categorical::softmax(logits));
  }
}
BENCHMARK(BM_Softmax)->Arg(8)->Arg(64)->Arg(1024);

static void BM_ApplyFullAction(benchmark::State& state) {
  auto logits = random_logits(static_cast<int>(state.range(0)), 2);
  auto action = categorical::DecodingAction::sampling(0.75, 10, 0.9, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(categorical::apply_action(logits, action));
  }
}
BENCHMARK(BM_ApplyFullAction)->Arg(8)->Arg(64)->Arg(1024);

static void BM_CandidateGridSweep(benchmark::State& state) {
  auto pool = actions::build_candidate_pool(actions::GridSpec::default_sweep());
  auto logits = random_logits(32, 3);
  for (auto _ : state) {
    for (int s = 0; s < pool.size(); ++s) {
      benchmark::DoNotOptimize(categorical::apply_action(logits, pool[s]));
    }
  }
}
BENCHMARK(BM_CandidateGridSweep);

static void BM_Sample(benchmark::State& state) {
  auto dist = categorical::softmax(random_logits(64, 4));
  auto stream = rng::Root(5).stream("bench-sample");
  for (auto _ : state) {
    benchmark::DoNotOptimize(categorical::sample(dist, stream));
  }
}
BENCHMARK(BM_Sample);

BENCHMARK_MAIN();
