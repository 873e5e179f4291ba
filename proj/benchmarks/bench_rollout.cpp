#include <benchmark/benchmark.h>

#include "declab/env.hpp"
#include "declab/policy.hpp"
#include "declab/rng.hpp"

using namespace declab;

static void BM_ForkingChainStaticRollout(benchmark::State& state) {
  env::ForkingChain chain{env::ForkingChainSpec{}};
  auto action = categorical::DecodingAction::sampling(1.0);
  auto instance = chain.make_instance(7);
  std::uint64_t rollout = 0;
  rng::Root root(21);
  for (auto _ : state) {
    auto stream = root.stream("bench-rollout", rollout++);
    benchmark::DoNotOptimize(chain.static_rollout(instance, action, stream));
  }
}
BENCHMARK(BM_ForkingChainStaticRollout);

static void BM_TokenPolicyRollout(benchmark::State& state) {
  env::ForkingChain chain{env::ForkingChainSpec{}};
  auto init = rng::Root(22).stream("bench-policy");
  policy::PolicyConfig config;
  config.hidden = {16, 16};
  config.dropout = 0.0;
  policy::TokPolicy policy(chain.obs_dim() + 1, policy::token_default_action_set(),
                           config, init);
  const auto& actions = policy.action_set().actions;
  std::uint64_t rollout = 0;
  rng::Root root(23);
  for (auto _ : state) {
    auto stream = root.stream("bench-tok", rollout++);
    env::StepController controller = [&](std::span<const double> features,
                                         int remaining, int budget,
                                         rng::Stream& s) {
      auto x = policy::tok_features(features, remaining, budget);
      return policy.select(x, std::nullopt, false, s).index;
    };
    auto instance = chain.make_instance(rollout % 64);
    benchmark::DoNotOptimize(
        env::rollout(chain, instance, actions, controller, chain.horizon(), stream));
  }
}
BENCHMARK(BM_TokenPolicyRollout);

static void BM_TwoRegimeEvaluate(benchmark::State& state) {
  env::TwoRegime regime{env::TwoRegimeSpec::default_spec()};
  auto action = categorical::DecodingAction::sampling(1.0);
  rng::Root root(24);
  env::RolloutFn fn = [&](const env::Instance& instance, int, rng::Stream& s) {
    return regime.static_rollout(instance, action, s);
  };
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        env::evaluate(regime, fn, 1, 1, 200, 0, root, "bench-eval"));
  }
}
BENCHMARK(BM_TwoRegimeEvaluate);
