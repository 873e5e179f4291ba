#pragma once

/**
 * Decoding adapters: small MLP policies over a discrete action set.
 *
 * A Policy maps observation features (plus, optionally, a compute budget)
 * to a categorical distribution over decoding actions:
 *
 *     z = [e || EmbedBudget(B)]   (budget mode kEmbedded)
 *     z = e                       (otherwise)
 *     p = softmax(MLP(z) / T_pol)
 *
 * The sequence-level adapter conditions on the parallel sampling budget B
 * through a two-layer embedder. The token-level adapter instead appends the
 * normalized remaining token budget to its features via tok_features() and
 * runs in budget mode kNone.
 */

#include <optional>
#include <span>
#include <vector>

#include "declab/actions.hpp"
#include "declab/categorical.hpp"
#include "declab/net.hpp"
#include "declab/rng.hpp"

namespace declab::policy {

enum class BudgetMode { kNone, kEmbedded };

struct PolicyConfig {
  std::vector<int> hidden = {32, 32};
  double dropout = 0.1;
  double policy_temperature = 1.0;
  BudgetMode budget = BudgetMode::kNone;
  int embed_hidden = 8;
  int embed_dim = 8;

  void validate() const;
};

/// Train-mode forward pass with everything backward() needs.
struct ForwardResult {
  categorical::CategoricalDist dist;
  std::vector<double> logits;
  net::ForwardCache trunk_cache;
  net::ForwardCache embed_cache;  // only populated in kEmbedded mode
};

/// Outcome of one action selection.
struct Choice {
  int index = 0;
  categorical::CategoricalDist dist;
  double log_prob = 0.0;
};

class Policy {
 public:
  Policy(int feature_dim, actions::ActionSet action_set, PolicyConfig config,
         rng::Stream& init);
  /// Rebuild from checkpointed parameters.
  Policy(int feature_dim, actions::ActionSet action_set, PolicyConfig config,
         std::vector<double> trunk_params, std::vector<double> embed_params);

  /// Deterministic eval-mode distribution over actions. A budget is
  /// required in kEmbedded mode and ignored otherwise.
  categorical::CategoricalDist forward(std::span<const double> features,
                                       std::optional<double> budget) const;

  /// Train-mode forward (dropout active) with cached activations.
  ForwardResult forward_train(std::span<const double> features,
                              std::optional<double> budget,
                              rng::Stream& dropout_stream) const;

  /// Eval-mode action selection: argmax (lowest index on ties) when
  /// deterministic, otherwise a categorical draw from the policy.
  Choice select(std::span<const double> features, std::optional<double> budget,
                bool deterministic, rng::Stream& stream) const;

  /// Same selection applied to an existing forward result.
  Choice select_from(const ForwardResult& forward, bool deterministic,
                     rng::Stream& stream) const;

  /// Routes d(loss)/d(logits) through the trunk (and budget embedder when
  /// present), accumulating into the flat gradient buffers.
  void backward(const ForwardResult& forward,
                std::span<const double> logits_grad,
                std::span<double> trunk_grads,
                std::span<double> embed_grads) const;

  int feature_dim() const { return feature_dim_; }
  int num_actions() const { return static_cast<int>(action_set_.actions.size()); }
  const actions::ActionSet& action_set() const { return action_set_; }
  const PolicyConfig& config() const { return config_; }
  bool budget_aware() const { return config_.budget == BudgetMode::kEmbedded; }

  net::Mlp& trunk() { return trunk_; }
  const net::Mlp& trunk() const { return trunk_; }
  bool has_embedder() const { return budget_aware(); }
  net::Mlp& embedder() { return embedder_; }
  const net::Mlp& embedder() const { return embedder_; }

 private:
  net::MlpSpec trunk_spec() const;
  net::MlpSpec embed_spec() const;
  std::vector<double> assemble_input(std::span<const double> features,
                                     std::optional<double> budget,
                                     net::ForwardCache* embed_cache,
                                     bool train_mode,
                                     rng::Stream* dropout_stream) const;

  int feature_dim_;
  actions::ActionSet action_set_;
  PolicyConfig config_;
  net::Mlp embedder_;  // 1 -> embed_hidden -> embed_dim (kEmbedded only)
  net::Mlp trunk_;
};

/// Both adapters share the Policy machinery; the aliases mark intent.
using SeqPolicy = Policy;
using TokPolicy = Policy;

/// Token-level feature assembly: appends the normalized remaining budget
/// phi(b_t) = b_t / b. Requires 0 <= remaining <= budget.
std::vector<double> tok_features(std::span<const double> step_features,
                                 int remaining_budget, int token_budget);

/// The four-action token-level set: greedy, T=0.5, T=1.0, T=1.25.
actions::ActionSet token_default_action_set();

}  // namespace declab::policy
