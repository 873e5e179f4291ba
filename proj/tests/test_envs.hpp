#pragma once

// Tiny purpose-built environments for training tests: a context-free bandit
// with per-action Bernoulli rewards and a one-step generator with a fixed
// base distribution (for masking mechanics).

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "declab/env.hpp"

namespace testenv {

/// Context-free bandit. Rewards are Bernoulli draws with the per-action-key
/// mean from the table (deterministic whenever the mean is 0 or 1).
class BanditEnv final : public declab::env::Environment {
 public:
  explicit BanditEnv(std::map<std::string, double> reward_means)
      : means_(std::move(reward_means)) {}

  int vocab_size() const override { return 2; }
  int horizon() const override { return 1; }
  int obs_dim() const override { return 1; }

  declab::env::Instance make_instance(std::uint64_t id) const override {
    declab::env::Instance instance;
    instance.id = id;
    return instance;
  }

  std::vector<double> context_features(const declab::env::Instance&,
                                       declab::rng::Stream&) const override {
    return {1.0};
  }

  std::vector<double> step_features(const declab::env::Instance&,
                                    const declab::env::RolloutState&,
                                    declab::rng::Stream&) const override {
    return {1.0};
  }

  declab::categorical::Logits base_logits(
      const declab::env::Instance&,
      const declab::env::RolloutState&) const override {
    return declab::categorical::Logits({0.0, 0.0});
  }

  double verify(const declab::env::Instance&,
                const declab::env::RolloutState&) const override {
    return 0.0;
  }

  double static_rollout(const declab::env::Instance&,
                        const declab::categorical::DecodingAction& action,
                        declab::rng::Stream& stream) const override {
    auto it = means_.find(action.key());
    if (it == means_.end()) {
      throw std::invalid_argument("BanditEnv: unknown action " + action.key());
    }
    const double mean = it->second;
    if (mean >= 1.0) return 1.0;
    if (mean <= 0.0) return 0.0;
    return stream.next_double() < mean ? 1.0 : 0.0;
  }

 private:
  std::map<std::string, double> means_;
};

/// One-step generator with a fixed base distribution; token 0 is correct.
class PeakEnv final : public declab::env::Environment {
 public:
  explicit PeakEnv(std::vector<double> base_probs)
      : probs_(std::move(base_probs)) {}

  int vocab_size() const override { return static_cast<int>(probs_.size()); }
  int horizon() const override { return 1; }
  int obs_dim() const override { return 1; }

  declab::env::Instance make_instance(std::uint64_t id) const override {
    declab::env::Instance instance;
    instance.id = id;
    return instance;
  }

  std::vector<double> context_features(const declab::env::Instance&,
                                       declab::rng::Stream&) const override {
    return {1.0};
  }

  std::vector<double> step_features(const declab::env::Instance&,
                                    const declab::env::RolloutState&,
                                    declab::rng::Stream&) const override {
    return {1.0};
  }

  declab::categorical::Logits base_logits(
      const declab::env::Instance&,
      const declab::env::RolloutState&) const override {
    std::vector<double> z(probs_.size());
    for (size_t i = 0; i < probs_.size(); ++i) {
      z[i] = probs_[i] > 0.0 ? std::log(probs_[i]) : -2000.0;
    }
    return declab::categorical::Logits(std::move(z));
  }

  double verify(const declab::env::Instance&,
                const declab::env::RolloutState& state) const override {
    return !state.tokens.empty() && state.tokens.front() == 0 ? 1.0 : 0.0;
  }

 private:
  std::vector<double> probs_;
};

}  // namespace testenv
