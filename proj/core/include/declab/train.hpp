#pragma once

/**
 * REINFORCE training loops for the two adapters.
 *
 * Sequence level: per batch element, sample an instance and a parallel
 * budget B, draw one action from the policy, run B rollouts under that
 * action and score the episode with the any-success Pass@B indicator. The
 * update ascends
 *
 *     log pi(a|x) * (r - baseline) + beta * H(pi(.|x)).
 *
 * Token level: roll out full trajectories with a per-step action draw; the
 * terminal reward is broadcast undiscounted to every step. Steps whose
 * *base* next-token distribution is already concentrated (max probability
 * above the mask threshold) contribute exactly zero gradient, for both the
 * log-prob and the entropy term. Instances whose rolling mean reward leaves
 * the configured band are dropped from batches (prompt filtering).
 *
 * Determinism: every stream is keyed by (seed, step, batch slot, ...), so a
 * resumed run replays the exact remaining trace of an uninterrupted one.
 */

#include <deque>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "declab/env.hpp"
#include "declab/policy.hpp"
#include "declab/rng.hpp"

namespace declab::train {

enum class BaselineMode { kBatchMean, kEma };

struct PromptFilterConfig {
  bool enabled = false;
  double min_mean = 0.02;
  double max_mean = 0.98;
  int window = 50;
};

struct TrainConfig {
  int batch_size = 64;
  int total_steps = 1000;

  double learning_rate = 0.01;
  double lr_decay = 0.97;
  /// Steps per epoch; the learning rate decays once per boundary. 0 disables.
  int epoch_length = 0;

  /// Entropy coefficient, interpolated linearly from start to end.
  double entropy_start = 0.05;
  double entropy_end = 0.005;

  BaselineMode baseline_mode = BaselineMode::kBatchMean;
  double ema_decay = 0.9;

  /// Budgets sampled uniformly per batch element (sequence level). A single
  /// entry trains at a fixed budget.
  std::vector<int> budgets = {1, 2, 4, 8};

  /// Token budget for token-level rollouts; 0 means the environment horizon.
  int token_budget = 0;

  double mask_threshold = 0.95;
  PromptFilterConfig prompt_filter;

  /// Number of distinct training instances cycled through.
  int train_pool_size = 512;

  /// Mid-training validation cadence; 0 disables.
  int eval_interval = 0;
  int eval_instances = 200;
  /// Validation metric Pass@k (and the budget used to compute it).
  int eval_metric_k = 1;

  /// Checkpoint cadence used by the CLI; 0 writes only the final checkpoint.
  int checkpoint_interval = 0;

  int workers = 1;

  void validate() const;
};

struct TraceRow {
  int step = 0;
  double mean_reward = 0.0;
  double baseline = 0.0;
  double mean_entropy = 0.0;
  /// Batch-mean policy distribution over actions.
  std::vector<double> action_probs;
  std::optional<double> validation;
};

/// Mutable loop state carried across steps and checkpoints.
struct TrainState {
  int completed_steps = 0;
  double ema_baseline = 0.0;
  std::map<std::uint64_t, std::deque<double>> reward_windows;
};

struct TrainResult {
  std::vector<TraceRow> trace;
};

/// Batch-mean baseline, or in-place EMA update b <- g*b + (1-g)*mean.
double compute_baseline(std::span<const double> rewards, BaselineMode mode,
                        double* ema_state, double ema_decay);

/// Trains the sequence-level adapter in place, resuming from
/// state.completed_steps and stopping after min(total_steps, until_step)
/// (until_step 0 means total_steps). Streams are keyed by absolute step, so
/// chunked and uninterrupted runs produce identical results. Throws
/// TrainingDivergedError on non-finite loss or gradients.
TrainResult train_seq(policy::SeqPolicy& policy, const env::Environment& env,
                      const TrainConfig& config, TrainState& state,
                      net::AdamState& trunk_opt, net::AdamState& embed_opt,
                      const rng::Root& root, int until_step = 0);

/// Trains the token-level adapter in place; same contract as train_seq.
TrainResult train_tok(policy::TokPolicy& policy, const env::Environment& env,
                      const TrainConfig& config, TrainState& state,
                      net::AdamState& trunk_opt, net::AdamState& embed_opt,
                      const rng::Root& root, int until_step = 0);

/**
 * One-batch REINFORCE gradient of the sequence objective for a frozen
 * policy, without applying an update: returns d(-J)/d(trunk params) averaged
 * over `num_samples` sampled episodes. Exposed for the estimator fidelity
 * and baseline-invariance checks.
 */
std::vector<double> seq_policy_gradient(const policy::SeqPolicy& policy,
                                        const env::Environment& env,
                                        const TrainConfig& config,
                                        int num_samples,
                                        std::optional<double> fixed_baseline,
                                        double entropy_coef,
                                        const rng::Root& root);

/// Instance-id base used for mid-training validation rollouts.
inline constexpr std::uint64_t kValidationInstanceBase = 1ull << 32;

}  // namespace declab::train
