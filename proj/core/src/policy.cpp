#include "declab/policy.hpp"

#include <cmath>
#include <stdexcept>

#include "declab/errors.hpp"

namespace declab::policy {

using categorical::CategoricalDist;

void PolicyConfig::validate() const {
  if (!(policy_temperature > 0.0)) {
    throw std::invalid_argument("policy_temperature must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("dropout must be in [0, 1)");
  }
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("hidden widths must be >= 1");
  }
  if (budget == BudgetMode::kEmbedded && (embed_hidden < 1 || embed_dim < 1)) {
    throw std::invalid_argument("budget embedder widths must be >= 1");
  }
}

net::MlpSpec Policy::trunk_spec() const {
  net::MlpSpec spec;
  spec.dims.push_back(feature_dim_ +
                      (budget_aware() ? config_.embed_dim : 0));
  for (int h : config_.hidden) spec.dims.push_back(h);
  spec.dims.push_back(num_actions());
  spec.dropout = config_.dropout;
  return spec;
}

net::MlpSpec Policy::embed_spec() const {
  net::MlpSpec spec;
  // Two layers as in the budget-encoding recipe: scalar -> hidden -> embed.
  spec.dims = {1, config_.embed_hidden, config_.embed_dim};
  spec.dropout = config_.dropout;
  return spec;
}

namespace {

net::Mlp make_embedder(const net::MlpSpec& spec, bool used, rng::Stream& init) {
  if (used) return net::Mlp(spec, init);
  // Placeholder net for budget-agnostic policies; never evaluated.
  return net::Mlp(spec, std::vector<double>(net::Mlp::param_count_for(spec), 0.0));
}

}  // namespace

Policy::Policy(int feature_dim, actions::ActionSet action_set,
               PolicyConfig config, rng::Stream& init)
    : feature_dim_(feature_dim),
      action_set_(std::move(action_set)),
      config_(std::move(config)),
      embedder_(make_embedder(embed_spec(), budget_aware(), init)),
      trunk_(trunk_spec(), init) {
  config_.validate();
  if (feature_dim_ < 1) throw std::invalid_argument("feature_dim must be >= 1");
  if (action_set_.actions.empty()) {
    throw std::invalid_argument("policy needs a non-empty action set");
  }
  for (const auto& a : action_set_.actions) a.validate();
}

Policy::Policy(int feature_dim, actions::ActionSet action_set,
               PolicyConfig config, std::vector<double> trunk_params,
               std::vector<double> embed_params)
    : feature_dim_(feature_dim),
      action_set_(std::move(action_set)),
      config_(std::move(config)),
      embedder_(embed_spec(),
                budget_aware()
                    ? std::move(embed_params)
                    : std::vector<double>(net::Mlp::param_count_for(embed_spec()), 0.0)),
      trunk_(trunk_spec(), std::move(trunk_params)) {
  config_.validate();
  if (action_set_.actions.empty()) {
    throw std::invalid_argument("policy needs a non-empty action set");
  }
}

std::vector<double> Policy::assemble_input(std::span<const double> features,
                                           std::optional<double> budget,
                                           net::ForwardCache* embed_cache,
                                           bool train_mode,
                                           rng::Stream* dropout_stream) const {
  if (static_cast<int>(features.size()) != feature_dim_) {
    throw std::invalid_argument("policy feature dimension mismatch");
  }
  std::vector<double> z(features.begin(), features.end());
  if (budget_aware()) {
    if (!budget) {
      throw std::invalid_argument("budget-aware policy requires a budget input");
    }
    const double b[1] = {*budget};
    net::ForwardCache local;
    net::ForwardCache& cache = embed_cache ? *embed_cache : local;
    auto emb = embedder_.forward(std::span<const double>(b, 1), cache,
                                 train_mode, dropout_stream);
    z.insert(z.end(), emb.begin(), emb.end());
  }
  return z;
}

CategoricalDist Policy::forward(std::span<const double> features,
                                std::optional<double> budget) const {
  auto z = assemble_input(features, budget, nullptr, false, nullptr);
  auto logits = trunk_.forward(z);
  for (double& v : logits) v /= config_.policy_temperature;
  return categorical::softmax(categorical::Logits(std::move(logits)));
}

ForwardResult Policy::forward_train(std::span<const double> features,
                                    std::optional<double> budget,
                                    rng::Stream& dropout_stream) const {
  net::ForwardCache embed_cache;
  auto z = assemble_input(features, budget, &embed_cache, true, &dropout_stream);
  net::ForwardCache trunk_cache;
  auto logits = trunk_.forward(z, trunk_cache, true, &dropout_stream);
  for (double v : logits) {
    if (!std::isfinite(v)) {
      throw TrainingDivergedError("policy logits are non-finite");
    }
  }
  auto scaled = logits;
  for (double& v : scaled) v /= config_.policy_temperature;
  ForwardResult result{
      categorical::softmax(categorical::Logits(std::move(scaled))),
      std::move(logits), std::move(trunk_cache), std::move(embed_cache)};
  return result;
}

Choice Policy::select_from(const ForwardResult& forward, bool deterministic,
                           rng::Stream& stream) const {
  const auto& dist = forward.dist;
  int index = deterministic ? categorical::argmax(dist)
                            : categorical::sample(dist, stream);
  return Choice{index, dist, std::log(dist[index])};
}

Choice Policy::select(std::span<const double> features,
                      std::optional<double> budget, bool deterministic,
                      rng::Stream& stream) const {
  auto dist = forward(features, budget);
  int index = deterministic ? categorical::argmax(dist)
                            : categorical::sample(dist, stream);
  return Choice{index, dist, std::log(dist[index])};
}

void Policy::backward(const ForwardResult& forward,
                      std::span<const double> logits_grad,
                      std::span<double> trunk_grads,
                      std::span<double> embed_grads) const {
  std::vector<double> input_grad;
  trunk_.backward(forward.trunk_cache, logits_grad, trunk_grads, &input_grad);
  if (budget_aware()) {
    std::span<const double> emb_grad(input_grad.data() + feature_dim_,
                                     static_cast<size_t>(config_.embed_dim));
    embedder_.backward(forward.embed_cache, emb_grad, embed_grads, nullptr);
  }
}

std::vector<double> tok_features(std::span<const double> step_features,
                                 int remaining_budget, int token_budget) {
  if (token_budget < 1) {
    throw std::invalid_argument("token budget must be >= 1");
  }
  if (remaining_budget < 0 || remaining_budget > token_budget) {
    throw std::invalid_argument("remaining budget must be in [0, token budget]");
  }
  std::vector<double> out(step_features.begin(), step_features.end());
  out.push_back(static_cast<double>(remaining_budget) / token_budget);
  return out;
}

actions::ActionSet token_default_action_set() {
  actions::ActionSet set;
  set.actions = {
      categorical::DecodingAction::make_greedy(),
      categorical::DecodingAction::sampling(0.5),
      categorical::DecodingAction::sampling(1.0),
      categorical::DecodingAction::sampling(1.25),
  };
  return set;
}

}  // namespace declab::policy
