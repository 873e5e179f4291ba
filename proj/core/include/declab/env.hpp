#pragma once

/**
 * Frozen synthetic generators with verifiable terminal rewards.
 *
 * An Environment plays the role of a frozen base model: it deterministically
 * maps (instance, partial sequence) to next-token logits, and a deterministic
 * verifier scores the finished sequence 0 or 1. All stochasticity comes from
 * the sampling streams handed in by the caller, so identical (instance,
 * action sequence, stream) triples reproduce identical trajectories.
 *
 * Two environments ship here:
 *
 *  - ForkingChain: a length-L token chain. Off fork steps the correct token
 *    is the argmax; at a small set of fork steps the argmax is a dead end
 *    and the viable branch carries minority mass p_f < 0.5, so greedy
 *    decoding provably scores zero and only temperature raised *at the
 *    forks* recovers reward. Step observations are a noisy fork/non-fork
 *    indicator.
 *
 *  - TwoRegime: a one-step generator with two context classes, each a
 *    mixture of instance archetypes (a reference next-token distribution
 *    plus the set of accepted tokens). Greedy is deterministic per instance,
 *    sampling is Bernoulli with the transformed correct-set mass, so Pass@B
 *    values for every decoding action are available in closed form.
 */

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "declab/categorical.hpp"
#include "declab/rng.hpp"

namespace declab::env {

/// One problem instance. `payload` fields are environment-specific.
struct Instance {
  std::uint64_t id = 0;
  int class_id = 0;   // TwoRegime: context class; ForkingChain: unused (0)
  int archetype = 0;  // TwoRegime: mixture component; ForkingChain: unused
};

/// Mutable rollout position: step counter plus emitted tokens.
struct RolloutState {
  int t = 0;
  std::vector<int> tokens;
};

/// One decision made during an episode.
struct StepDecision {
  int action_index = 0;
  double log_prob = 0.0;
  std::vector<double> policy_dist;
  bool masked = false;
};

/// One complete rollout: context, per-step decisions, terminal reward.
struct EpisodeRecord {
  std::uint64_t instance_id = 0;
  std::vector<double> context;
  std::vector<StepDecision> decisions;
  std::vector<int> tokens;
  double reward = 0.0;
  int budget_used = 1;

  int length() const { return static_cast<int>(tokens.size()); }
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual int vocab_size() const = 0;
  /// Maximum trajectory length; always <= the configured token budget.
  virtual int horizon() const = 0;
  /// Dimension of both context and per-step observation features.
  virtual int obs_dim() const = 0;

  /// Deterministic function of the instance id.
  virtual Instance make_instance(std::uint64_t instance_id) const = 0;

  /// Sequence-level context features (noisy; consumes the stream).
  virtual std::vector<double> context_features(const Instance& instance,
                                               rng::Stream& stream) const = 0;

  /// Per-step observation features (noisy; consumes the stream).
  virtual std::vector<double> step_features(const Instance& instance,
                                            const RolloutState& state,
                                            rng::Stream& stream) const = 0;

  /// Frozen-model next-token logits; deterministic in (instance, state).
  virtual categorical::Logits base_logits(const Instance& instance,
                                          const RolloutState& state) const = 0;

  virtual void apply_token(const Instance& instance, RolloutState& state,
                           int token) const;

  virtual bool done(const Instance& instance, const RolloutState& state) const;

  /// Deterministic verifier over the finished sequence; returns 0 or 1.
  virtual double verify(const Instance& instance,
                        const RolloutState& state) const = 0;

  /// Full rollout under a single fixed decoding action. Returns the reward.
  virtual double static_rollout(const Instance& instance,
                                const categorical::DecodingAction& action,
                                rng::Stream& stream) const;
};

/// Chooses the next action index from step features and remaining budget.
using StepController = std::function<int(
    std::span<const double> step_features, int remaining_budget,
    int token_budget, rng::Stream& stream)>;

/// Runs one token-level episode under `controller`, drawing per-step actions
/// from `actions`. Features, sampling and the controller all consume
/// `stream` in a fixed order.
EpisodeRecord rollout(const Environment& env, const Instance& instance,
                      std::span<const categorical::DecodingAction> actions,
                      const StepController& controller, int token_budget,
                      rng::Stream& stream);

// ---- ForkingChain ----------------------------------------------------------

struct ForkingChainSpec {
  int length = 20;
  std::vector<int> fork_steps = {5, 12};
  /// Base-distribution mass of the viable branch token at a fork. The dead
  /// end receives 1 - fork_viable_mass, every other token zero.
  double fork_viable_mass = 0.45;
  /// Total off-fork base mass on dead-end tokens; the correct token keeps
  /// 1 - offfork_noise_mass.
  double offfork_noise_mass = 0.3;
  /// How many distinct dead-end tokens share the off-fork noise mass.
  int noise_support = 1;
  int vocab = 8;
  /// Stddev of the additive gaussian noise on the fork/non-fork indicator.
  double obs_noise = 0.1;
  /// Keys the per-instance token layout (which tokens are correct/viable).
  std::uint64_t structure_seed = 0;

  void validate() const;
};

class ForkingChain final : public Environment {
 public:
  explicit ForkingChain(ForkingChainSpec spec);

  int vocab_size() const override { return spec_.vocab; }
  int horizon() const override { return spec_.length; }
  int obs_dim() const override { return 2; }

  Instance make_instance(std::uint64_t instance_id) const override;
  std::vector<double> context_features(const Instance&,
                                       rng::Stream&) const override;
  std::vector<double> step_features(const Instance&, const RolloutState&,
                                    rng::Stream&) const override;
  categorical::Logits base_logits(const Instance&,
                                  const RolloutState&) const override;
  double verify(const Instance&, const RolloutState&) const override;

  const ForkingChainSpec& spec() const { return spec_; }
  bool is_fork(int step) const;

  /// Token expected by the verifier at `step` (viable branch at forks,
  /// correct token elsewhere).
  int expected_token(const Instance& instance, int step) const;

 private:
  int derived_token(const Instance& instance, int step, int salt,
                    int exclude = -1) const;

  ForkingChainSpec spec_;
  std::vector<bool> fork_mask_;
};

/// Spec-conformant alias for running a ForkingChain episode under a
/// per-step controller.
EpisodeRecord forking_rollout(const ForkingChain& env, const Instance& instance,
                              std::span<const categorical::DecodingAction> actions,
                              const StepController& controller,
                              rng::Stream& stream);

// ---- TwoRegime -------------------------------------------------------------

struct Archetype {
  double weight = 1.0;
  /// Reference next-token distribution at temperature 1.
  std::vector<double> base_probs;
  /// Token indices accepted by the verifier.
  std::vector<int> correct_tokens;
};

struct TwoRegimeSpec {
  /// Probability that an instance belongs to class 0.
  double class_mix = 0.5;
  std::array<std::vector<Archetype>, 2> classes;
  double obs_noise = 0.1;
  /// Optional allow-list; rollouts with any other action are rejected.
  std::optional<std::vector<categorical::DecodingAction>> allowed_actions;
  std::uint64_t structure_seed = 0;

  void validate() const;

  /// Two-class mixture used throughout tests and example configs: class 0
  /// prefers deterministic decoding at budget 1 but sampling at budget 8,
  /// class 1 prefers sampling at every budget.
  static TwoRegimeSpec default_spec();
};

class TwoRegime final : public Environment {
 public:
  explicit TwoRegime(TwoRegimeSpec spec);

  int vocab_size() const override { return vocab_; }
  int horizon() const override { return 1; }
  int obs_dim() const override { return 2; }

  Instance make_instance(std::uint64_t instance_id) const override;
  std::vector<double> context_features(const Instance&,
                                       rng::Stream&) const override;
  std::vector<double> step_features(const Instance&, const RolloutState&,
                                    rng::Stream&) const override;
  categorical::Logits base_logits(const Instance&,
                                  const RolloutState&) const override;
  double verify(const Instance&, const RolloutState&) const override;
  double static_rollout(const Instance&, const categorical::DecodingAction&,
                        rng::Stream&) const override;

  const TwoRegimeSpec& spec() const { return spec_; }
  const Archetype& archetype_of(const Instance& instance) const;

 private:
  void check_allowed(const categorical::DecodingAction& action) const;

  TwoRegimeSpec spec_;
  int vocab_ = 0;
  std::array<std::vector<categorical::Logits>, 2> logits_;  // per archetype
};

/// One-step TwoRegime episode under a fixed action; returns the 0/1 reward.
double two_regime_rollout(const TwoRegime& env, const Instance& instance,
                          const categorical::DecodingAction& action,
                          rng::Stream& stream);

// ---- evaluation ------------------------------------------------------------

/// Unbiased Pass@k estimator: 1 - C(n-c, k) / C(n, k).
double pass_at_k(int num_samples, int num_correct, int k);

struct EvalSummary {
  double mean = 0.0;
  /// Half-width of the 95% normal-approximation confidence interval.
  double ci_half_width = 0.0;
  int episodes = 0;
};

/// Produces the 0/1 reward of one rollout for a given instance. `sample_idx`
/// enumerates the parallel samples of that instance.
using RolloutFn = std::function<double(const Instance& instance, int sample_idx,
                                       rng::Stream& stream)>;

/**
 * Pass@k evaluation: for each of `episodes` fresh instances draws
 * `num_samples` rewards through `fn` and averages the unbiased Pass@k
 * estimate. Streams are derived per (instance id, sample), so results do
 * not depend on evaluation order or worker count.
 */
EvalSummary evaluate(const Environment& env, const RolloutFn& fn, int k,
                     int num_samples, int episodes,
                     std::uint64_t instance_id_base, const rng::Root& root,
                     std::string_view stream_label, int workers = 1);

}  // namespace declab::env
