#include "declab/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "declab/errors.hpp"
#include "declab/parallel.hpp"

namespace declab::train {

using categorical::CategoricalDist;
using env::Instance;

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (total_steps < 1) throw ConfigError("total_steps must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (entropy_start < 0.0 || entropy_end < 0.0) {
    throw ConfigError("entropy coefficients must be >= 0");
  }
  if (!(mask_threshold > 0.0 && mask_threshold <= 1.0)) {
    throw ConfigError("mask_threshold must be in (0, 1]");
  }
  if (budgets.empty()) throw ConfigError("budgets must be non-empty");
  for (int b : budgets) {
    if (b < 1) throw ConfigError("budgets must be >= 1");
  }
  if (train_pool_size < 1) throw ConfigError("train_pool_size must be >= 1");
  if (prompt_filter.enabled) {
    if (prompt_filter.window < 1) throw ConfigError("filter window must be >= 1");
    if (prompt_filter.min_mean > prompt_filter.max_mean) {
      throw ConfigError("prompt filter bounds are inverted");
    }
  }
  if (eval_interval > 0 && eval_instances < 2) {
    throw ConfigError("eval_instances must be >= 2");
  }
  if (eval_metric_k < 1) throw ConfigError("eval_metric_k must be >= 1");
}

double compute_baseline(std::span<const double> rewards, BaselineMode mode,
                        double* ema_state, double ema_decay) {
  if (rewards.empty()) {
    throw std::invalid_argument("compute_baseline needs a non-empty batch");
  }
  const double mean =
      std::accumulate(rewards.begin(), rewards.end(), 0.0) /
      static_cast<double>(rewards.size());
  if (mode == BaselineMode::kBatchMean) return mean;
  if (ema_state == nullptr) {
    throw std::invalid_argument("EMA baseline needs persistent state");
  }
  *ema_state = ema_decay * (*ema_state) + (1.0 - ema_decay) * mean;
  return *ema_state;
}

namespace {

double entropy_coef_at(const TrainConfig& config, int step) {
  if (config.total_steps <= 1) return config.entropy_start;
  const double t = static_cast<double>(step - 1) /
                   static_cast<double>(config.total_steps - 1);
  return config.entropy_start + (config.entropy_end - config.entropy_start) * t;
}

/// d(logpi(a) * adv + beta * H) / d(logits) for one decision.
std::vector<double> objective_logits_grad(const CategoricalDist& dist,
                                          int action, double advantage,
                                          double beta, double t_pol) {
  const auto& p = dist.probs();
  const double h = categorical::entropy(dist);
  std::vector<double> grad(p.size());
  for (size_t j = 0; j < p.size(); ++j) {
    const double indicator = static_cast<int>(j) == action ? 1.0 : 0.0;
    const double d_logp = (indicator - p[j]) * advantage;
    const double d_entropy = -p[j] * (std::log(p[j]) + h);
    grad[j] = (d_logp + beta * d_entropy) / t_pol;
  }
  return grad;
}

bool filtered_out(const TrainState& state, const PromptFilterConfig& filter,
                  std::uint64_t instance_id) {
  if (!filter.enabled) return false;
  auto it = state.reward_windows.find(instance_id);
  if (it == state.reward_windows.end()) return false;
  if (static_cast<int>(it->second.size()) < filter.window) return false;
  const double mean =
      std::accumulate(it->second.begin(), it->second.end(), 0.0) /
      static_cast<double>(it->second.size());
  return mean < filter.min_mean || mean > filter.max_mean;
}

void push_reward_window(TrainState& state, const PromptFilterConfig& filter,
                        std::uint64_t instance_id, double reward) {
  if (!filter.enabled) return;
  auto& window = state.reward_windows[instance_id];
  window.push_back(reward);
  while (static_cast<int>(window.size()) > filter.window) window.pop_front();
}

struct BatchStats {
  std::vector<double> rewards;
  double mean_entropy = 0.0;
  std::vector<double> action_probs;
};

TraceRow make_trace_row(int step, const BatchStats& stats, double baseline,
                        int num_actions) {
  TraceRow row;
  row.step = step;
  const int n = static_cast<int>(stats.rewards.size());
  row.mean_reward =
      n > 0 ? std::accumulate(stats.rewards.begin(), stats.rewards.end(), 0.0) / n
            : 0.0;
  row.baseline = baseline;
  row.mean_entropy = n > 0 ? stats.mean_entropy / n : 0.0;
  row.action_probs = stats.action_probs;
  if (n > 0) {
    for (double& v : row.action_probs) v /= n;
  } else {
    row.action_probs.assign(static_cast<size_t>(num_actions), 0.0);
  }
  return row;
}

bool tok_uses_budget_feature(const policy::TokPolicy& policy,
                             const env::Environment& environment) {
  if (policy.feature_dim() == environment.obs_dim() + 1) return true;
  if (policy.feature_dim() == environment.obs_dim()) return false;
  throw ConfigError("token policy feature dimension matches neither obs_dim "
                    "nor obs_dim + 1");
}

double validate_seq(const policy::SeqPolicy& policy,
                    const env::Environment& environment,
                    const TrainConfig& config, const rng::Root& root,
                    int step) {
  const int k = config.eval_metric_k;
  env::RolloutFn fn = [&](const Instance& instance, int, rng::Stream& stream) {
    auto features = environment.context_features(instance, stream);
    auto choice = policy.select(features, static_cast<double>(k),
                                /*deterministic=*/false, stream);
    return environment.static_rollout(
        instance, policy.action_set().actions[static_cast<size_t>(choice.index)],
        stream);
  };
  return env::evaluate(environment, fn, k, k, config.eval_instances,
                       kValidationInstanceBase, root,
                       "seq-val-" + std::to_string(step), config.workers)
      .mean;
}

double validate_tok(const policy::TokPolicy& policy,
                    const env::Environment& environment,
                    const TrainConfig& config, bool budget_feature,
                    const rng::Root& root, int step) {
  const int k = config.eval_metric_k;
  const int token_budget =
      config.token_budget > 0 ? config.token_budget : environment.horizon();
  const auto& actions = policy.action_set().actions;
  env::RolloutFn fn = [&](const Instance& instance, int, rng::Stream& stream) {
    env::StepController controller =
        [&](std::span<const double> features, int remaining, int budget,
            rng::Stream& s) {
          if (budget_feature) {
            auto x = policy::tok_features(features, remaining, budget);
            return policy.select(x, std::nullopt, false, s).index;
          }
          return policy.select(features, std::nullopt, false, s).index;
        };
    auto episode = env::rollout(environment, instance, actions, controller,
                                token_budget, stream);
    return episode.reward;
  };
  return env::evaluate(environment, fn, k, k, config.eval_instances,
                       kValidationInstanceBase, root,
                       "tok-val-" + std::to_string(step), config.workers)
      .mean;
}

}  // namespace

TrainResult train_seq(policy::SeqPolicy& policy, const env::Environment& environment,
                      const TrainConfig& config, TrainState& state,
                      net::AdamState& trunk_opt, net::AdamState& embed_opt,
                      const rng::Root& root, int until_step) {
  config.validate();
  TrainResult result;
  const int num_actions = policy.num_actions();
  const auto& actions = policy.action_set().actions;
  const int last_step = until_step > 0 ? std::min(until_step, config.total_steps)
                                       : config.total_steps;

  struct Sample {
    bool skipped = false;
    std::uint64_t instance_id = 0;
    int budget = 1;
    std::optional<policy::ForwardResult> forward;
    int action = 0;
    double reward = 0.0;
  };

  for (int step = state.completed_steps + 1; step <= last_step; ++step) {
    std::vector<Sample> batch(static_cast<size_t>(config.batch_size));
    for (int i = 0; i < config.batch_size; ++i) {
      auto setup = root.stream("seq-setup", static_cast<std::uint64_t>(step),
                               static_cast<std::uint64_t>(i));
      auto& sample = batch[static_cast<size_t>(i)];
      sample.instance_id =
          setup.next_below(static_cast<std::uint64_t>(config.train_pool_size));
      sample.budget = config.budgets[setup.next_below(config.budgets.size())];
      sample.skipped = filtered_out(state, config.prompt_filter, sample.instance_id);
    }

    parallel_for(config.batch_size, config.workers, [&](int i) {
      auto& sample = batch[static_cast<size_t>(i)];
      if (sample.skipped) return;
      auto stream = root.stream("seq-episode", static_cast<std::uint64_t>(step),
                                static_cast<std::uint64_t>(i));
      Instance instance = environment.make_instance(sample.instance_id);
      auto features = environment.context_features(instance, stream);
      sample.forward = policy.forward_train(
          features, static_cast<double>(sample.budget), stream);
      sample.action = policy.select_from(*sample.forward, false, stream).index;
      bool success = false;
      for (int b = 0; b < sample.budget; ++b) {
        auto rollout_stream =
            root.stream("seq-rollout", static_cast<std::uint64_t>(step),
                        static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(b));
        if (environment.static_rollout(
                instance, actions[static_cast<size_t>(sample.action)],
                rollout_stream) > 0.5) {
          success = true;
        }
      }
      sample.reward = success ? 1.0 : 0.0;
    });

    BatchStats stats;
    stats.action_probs.assign(static_cast<size_t>(num_actions), 0.0);
    for (const auto& sample : batch) {
      if (sample.skipped) continue;
      stats.rewards.push_back(sample.reward);
      stats.mean_entropy += categorical::entropy(sample.forward->dist);
      for (int j = 0; j < num_actions; ++j) {
        stats.action_probs[static_cast<size_t>(j)] += sample.forward->dist[j];
      }
    }

    double baseline = 0.0;
    if (!stats.rewards.empty()) {
      baseline = compute_baseline(stats.rewards, config.baseline_mode,
                                  &state.ema_baseline, config.ema_decay);
      const double beta = entropy_coef_at(config, step);
      const double inv_count = 1.0 / static_cast<double>(stats.rewards.size());
      std::vector<double> trunk_grads(policy.trunk().param_count(), 0.0);
      std::vector<double> embed_grads(policy.embedder().param_count(), 0.0);
      for (const auto& sample : batch) {
        if (sample.skipped) continue;
        auto grad = objective_logits_grad(sample.forward->dist, sample.action,
                                          sample.reward - baseline, beta,
                                          policy.config().policy_temperature);
        for (double& g : grad) g *= -inv_count;  // ascent -> descent loss
        policy.backward(*sample.forward, grad, trunk_grads, embed_grads);
      }
      trunk_opt.step(policy.trunk().params(), trunk_grads);
      if (policy.budget_aware()) {
        embed_opt.step(policy.embedder().params(), embed_grads);
      }
      if (config.epoch_length > 0 && step % config.epoch_length == 0) {
        trunk_opt.advance_epoch();
        embed_opt.advance_epoch();
      }
    }

    for (const auto& sample : batch) {
      if (sample.skipped) continue;
      push_reward_window(state, config.prompt_filter, sample.instance_id,
                         sample.reward);
    }

    TraceRow row = make_trace_row(step, stats, baseline, num_actions);
    if (config.eval_interval > 0 && step % config.eval_interval == 0) {
      row.validation = validate_seq(policy, environment, config, root, step);
    }
    result.trace.push_back(std::move(row));
    state.completed_steps = step;
  }
  return result;
}

TrainResult train_tok(policy::TokPolicy& policy, const env::Environment& environment,
                      const TrainConfig& config, TrainState& state,
                      net::AdamState& trunk_opt, net::AdamState& embed_opt,
                      const rng::Root& root, int until_step) {
  config.validate();
  const int last_step = until_step > 0 ? std::min(until_step, config.total_steps)
                                       : config.total_steps;
  TrainResult result;
  const int num_actions = policy.num_actions();
  const auto& actions = policy.action_set().actions;
  const bool budget_feature = tok_uses_budget_feature(policy, environment);
  const int token_budget =
      config.token_budget > 0 ? config.token_budget : environment.horizon();

  struct StepRecord {
    policy::ForwardResult forward;
    int action = 0;
    bool masked = false;
  };
  struct Sample {
    bool skipped = false;
    std::uint64_t instance_id = 0;
    std::vector<StepRecord> steps;
    double reward = 0.0;
  };

  for (int step = state.completed_steps + 1; step <= last_step; ++step) {
    std::vector<Sample> batch(static_cast<size_t>(config.batch_size));
    for (int i = 0; i < config.batch_size; ++i) {
      auto setup = root.stream("tok-setup", static_cast<std::uint64_t>(step),
                               static_cast<std::uint64_t>(i));
      auto& sample = batch[static_cast<size_t>(i)];
      sample.instance_id =
          setup.next_below(static_cast<std::uint64_t>(config.train_pool_size));
      sample.skipped = filtered_out(state, config.prompt_filter, sample.instance_id);
    }

    parallel_for(config.batch_size, config.workers, [&](int i) {
      auto& sample = batch[static_cast<size_t>(i)];
      if (sample.skipped) return;
      auto stream = root.stream("tok-episode", static_cast<std::uint64_t>(step),
                                static_cast<std::uint64_t>(i));
      Instance instance = environment.make_instance(sample.instance_id);
      env::RolloutState rollout_state;
      const int max_steps = std::min(token_budget, environment.horizon());
      while (!environment.done(instance, rollout_state) &&
             rollout_state.t < max_steps) {
        auto features =
            environment.step_features(instance, rollout_state, stream);
        StepRecord record{
            budget_feature
                ? policy.forward_train(
                      policy::tok_features(features,
                                           token_budget - rollout_state.t,
                                           token_budget),
                      std::nullopt, stream)
                : policy.forward_train(features, std::nullopt, stream),
            0, false};
        record.action = policy.select_from(record.forward, false, stream).index;
        auto base = environment.base_logits(instance, rollout_state);
        auto base_dist = categorical::softmax(base);
        record.masked =
            *std::max_element(base_dist.probs().begin(),
                              base_dist.probs().end()) > config.mask_threshold;
        auto action_dist = categorical::apply_action(
            base, actions[static_cast<size_t>(record.action)]);
        int token = categorical::sample(action_dist, stream);
        environment.apply_token(instance, rollout_state, token);
        sample.steps.push_back(std::move(record));
      }
      sample.reward = environment.verify(instance, rollout_state);
    });

    BatchStats stats;
    stats.action_probs.assign(static_cast<size_t>(num_actions), 0.0);
    int decision_count = 0;
    for (const auto& sample : batch) {
      if (sample.skipped) continue;
      stats.rewards.push_back(sample.reward);
      for (const auto& record : sample.steps) {
        stats.mean_entropy += categorical::entropy(record.forward.dist);
        for (int j = 0; j < num_actions; ++j) {
          stats.action_probs[static_cast<size_t>(j)] += record.forward.dist[j];
        }
        ++decision_count;
      }
    }

    double baseline = 0.0;
    if (!stats.rewards.empty()) {
      baseline = compute_baseline(stats.rewards, config.baseline_mode,
                                  &state.ema_baseline, config.ema_decay);
      const double beta = entropy_coef_at(config, step);
      const double inv_count = 1.0 / static_cast<double>(stats.rewards.size());
      std::vector<double> trunk_grads(policy.trunk().param_count(), 0.0);
      std::vector<double> embed_grads(policy.embedder().param_count(), 0.0);
      for (const auto& sample : batch) {
        if (sample.skipped) continue;
        const double advantage = sample.reward - baseline;
        for (const auto& record : sample.steps) {
          if (record.masked) continue;  // concentrated steps: exactly no gradient
          auto grad = objective_logits_grad(record.forward.dist, record.action,
                                            advantage, beta,
                                            policy.config().policy_temperature);
          for (double& g : grad) g *= -inv_count;
          policy.backward(record.forward, grad, trunk_grads, embed_grads);
        }
      }
      trunk_opt.step(policy.trunk().params(), trunk_grads);
      if (policy.budget_aware()) {
        embed_opt.step(policy.embedder().params(), embed_grads);
      }
      if (config.epoch_length > 0 && step % config.epoch_length == 0) {
        trunk_opt.advance_epoch();
        embed_opt.advance_epoch();
      }
    }

    for (const auto& sample : batch) {
      if (sample.skipped) continue;
      push_reward_window(state, config.prompt_filter, sample.instance_id,
                         sample.reward);
    }

    TraceRow row = make_trace_row(step, stats, baseline, num_actions);
    if (decision_count > 0) {
      // entropy and action probs average over decisions, not episodes
      row.mean_entropy = stats.mean_entropy / decision_count;
      row.action_probs = stats.action_probs;
      for (double& v : row.action_probs) v /= decision_count;
    }
    if (config.eval_interval > 0 && step % config.eval_interval == 0) {
      row.validation =
          validate_tok(policy, environment, config, budget_feature, root, step);
    }
    result.trace.push_back(std::move(row));
    state.completed_steps = step;
  }
  return result;
}

std::vector<double> seq_policy_gradient(const policy::SeqPolicy& policy,
                                        const env::Environment& environment,
                                        const TrainConfig& config,
                                        int num_samples,
                                        std::optional<double> fixed_baseline,
                                        double entropy_coef,
                                        const rng::Root& root) {
  if (num_samples < 1) {
    throw std::invalid_argument("seq_policy_gradient needs num_samples >= 1");
  }
  const auto& actions = policy.action_set().actions;
  struct Draw {
    policy::ForwardResult forward;
    int action;
    double reward;
  };
  std::vector<Draw> draws;
  draws.reserve(static_cast<size_t>(num_samples));
  double reward_sum = 0.0;
  for (int i = 0; i < num_samples; ++i) {
    auto stream = root.stream("pg-probe", static_cast<std::uint64_t>(i));
    Instance instance = environment.make_instance(
        stream.next_below(static_cast<std::uint64_t>(config.train_pool_size)));
    auto features = environment.context_features(instance, stream);
    auto forward = policy.forward_train(
        features, static_cast<double>(config.budgets.front()), stream);
    int action = policy.select_from(forward, false, stream).index;
    double reward = environment.static_rollout(
        instance, actions[static_cast<size_t>(action)], stream);
    reward_sum += reward;
    draws.push_back({std::move(forward), action, reward});
  }
  const double baseline =
      fixed_baseline ? *fixed_baseline : reward_sum / num_samples;
  std::vector<double> trunk_grads(policy.trunk().param_count(), 0.0);
  std::vector<double> embed_grads(policy.embedder().param_count(), 0.0);
  const double inv = 1.0 / static_cast<double>(num_samples);
  for (const auto& draw : draws) {
    auto grad = objective_logits_grad(draw.forward.dist, draw.action,
                                      draw.reward - baseline, entropy_coef,
                                      policy.config().policy_temperature);
    for (double& g : grad) g *= inv;  // ascent direction dJ/dtheta
    policy.backward(draw.forward, grad, trunk_grads, embed_grads);
  }
  return trunk_grads;
}

}  // namespace declab::train
