#include "declab/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "declab/parallel.hpp"

namespace declab::env {

namespace {

// Logit assigned to zero-mass tokens. Far enough below any live logit that
// the softmax contribution underflows to exactly 0.0 for every temperature
// in the candidate grid.
constexpr double kNegligibleLogit = -2000.0;

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegligibleLogit; }

}  // namespace

void Environment::apply_token(const Instance&, RolloutState& state,
                              int token) const {
  state.tokens.push_back(token);
  ++state.t;
}

bool Environment::done(const Instance&, const RolloutState& state) const {
  return state.t >= horizon();
}

double Environment::static_rollout(const Instance& instance,
                                   const categorical::DecodingAction& action,
                                   rng::Stream& stream) const {
  RolloutState state;
  while (!done(instance, state)) {
    auto dist = categorical::apply_action(base_logits(instance, state), action);
    int token = categorical::sample(dist, stream);
    apply_token(instance, state, token);
  }
  return verify(instance, state);
}

EpisodeRecord rollout(const Environment& env, const Instance& instance,
                      std::span<const categorical::DecodingAction> actions,
                      const StepController& controller, int token_budget,
                      rng::Stream& stream) {
  if (actions.empty()) {
    throw std::invalid_argument("rollout needs a non-empty action list");
  }
  EpisodeRecord episode;
  episode.instance_id = instance.id;
  RolloutState state;
  const int max_steps = std::min(token_budget, env.horizon());
  while (!env.done(instance, state) && state.t < max_steps) {
    auto features = env.step_features(instance, state, stream);
    const int remaining = token_budget - state.t;
    const int choice = controller(features, remaining, token_budget, stream);
    if (choice < 0 || choice >= static_cast<int>(actions.size())) {
      throw std::invalid_argument("controller returned an invalid action index");
    }
    auto dist = categorical::apply_action(env.base_logits(instance, state),
                                          actions[static_cast<size_t>(choice)]);
    int token = categorical::sample(dist, stream);
    StepDecision decision;
    decision.action_index = choice;
    episode.decisions.push_back(std::move(decision));
    env.apply_token(instance, state, token);
  }
  episode.tokens = state.tokens;
  episode.reward = env.verify(instance, state);
  return episode;
}

// ---- ForkingChain ----------------------------------------------------------

void ForkingChainSpec::validate() const {
  if (length < 1) throw std::invalid_argument("chain length must be >= 1");
  if (vocab < 2) throw std::invalid_argument("vocab must be >= 2");
  if (!(fork_viable_mass > 0.0 && fork_viable_mass < 0.5)) {
    throw std::invalid_argument("fork_viable_mass must be in (0, 0.5)");
  }
  if (!(offfork_noise_mass >= 0.0 && offfork_noise_mass < 0.5)) {
    throw std::invalid_argument("offfork_noise_mass must be in [0, 0.5)");
  }
  if (noise_support < 1 || noise_support > vocab - 1) {
    throw std::invalid_argument("noise_support must be in [1, vocab-1]");
  }
  for (int f : fork_steps) {
    if (f < 0 || f >= length) {
      throw std::invalid_argument("fork step outside the chain");
    }
  }
  if (obs_noise < 0.0) throw std::invalid_argument("obs_noise must be >= 0");
}

ForkingChain::ForkingChain(ForkingChainSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  fork_mask_.assign(static_cast<size_t>(spec_.length), false);
  for (int f : spec_.fork_steps) fork_mask_[static_cast<size_t>(f)] = true;
}

bool ForkingChain::is_fork(int step) const {
  return step >= 0 && step < spec_.length && fork_mask_[static_cast<size_t>(step)];
}

Instance ForkingChain::make_instance(std::uint64_t instance_id) const {
  Instance inst;
  inst.id = instance_id;
  return inst;
}

int ForkingChain::derived_token(const Instance& instance, int step, int salt,
                                int exclude) const {
  rng::Root structure(spec_.structure_seed);
  auto stream = structure.stream("fc-structure", instance.id,
                                 static_cast<std::uint64_t>(step),
                                 static_cast<std::uint64_t>(salt));
  const int v = spec_.vocab;
  if (exclude < 0) {
    return static_cast<int>(stream.next_below(static_cast<std::uint64_t>(v)));
  }
  int token = static_cast<int>(stream.next_below(static_cast<std::uint64_t>(v - 1)));
  if (token >= exclude) ++token;
  return token;
}

int ForkingChain::expected_token(const Instance& instance, int step) const {
  return derived_token(instance, step, 0);
}

std::vector<double> ForkingChain::context_features(const Instance&,
                                                   rng::Stream& stream) const {
  return {1.0 + spec_.obs_noise * stream.next_gaussian(),
          spec_.obs_noise * stream.next_gaussian()};
}

std::vector<double> ForkingChain::step_features(const Instance&,
                                                const RolloutState& state,
                                                rng::Stream& stream) const {
  const bool fork = is_fork(state.t);
  return {(fork ? 0.0 : 1.0) + spec_.obs_noise * stream.next_gaussian(),
          (fork ? 1.0 : 0.0) + spec_.obs_noise * stream.next_gaussian()};
}

categorical::Logits ForkingChain::base_logits(const Instance& instance,
                                              const RolloutState& state) const {
  const int step = state.t;
  if (step < 0 || step >= spec_.length) {
    throw std::invalid_argument("base_logits past the end of the chain");
  }
  std::vector<double> z(static_cast<size_t>(spec_.vocab), kNegligibleLogit);
  const int target = expected_token(instance, step);
  if (is_fork(step)) {
    const int dead = derived_token(instance, step, 1, /*exclude=*/target);
    z[static_cast<size_t>(target)] = safe_log(spec_.fork_viable_mass);
    z[static_cast<size_t>(dead)] = safe_log(1.0 - spec_.fork_viable_mass);
  } else {
    z[static_cast<size_t>(target)] = safe_log(1.0 - spec_.offfork_noise_mass);
    const double per_noise = spec_.offfork_noise_mass / spec_.noise_support;
    for (int j = 0; j < spec_.noise_support; ++j) {
      const int noise = (target + 1 + j) % spec_.vocab;
      z[static_cast<size_t>(noise)] = safe_log(per_noise);
    }
  }
  return categorical::Logits(std::move(z));
}

double ForkingChain::verify(const Instance& instance,
                            const RolloutState& state) const {
  if (static_cast<int>(state.tokens.size()) < spec_.length) return 0.0;
  for (int t = 0; t < spec_.length; ++t) {
    if (state.tokens[static_cast<size_t>(t)] != expected_token(instance, t)) {
      return 0.0;
    }
  }
  return 1.0;
}

EpisodeRecord forking_rollout(const ForkingChain& env, const Instance& instance,
                              std::span<const categorical::DecodingAction> actions,
                              const StepController& controller,
                              rng::Stream& stream) {
  return rollout(env, instance, actions, controller, env.horizon(), stream);
}

// ---- TwoRegime -------------------------------------------------------------

void TwoRegimeSpec::validate() const {
  if (!(class_mix >= 0.0 && class_mix <= 1.0)) {
    throw std::invalid_argument("class_mix must be in [0, 1]");
  }
  if (obs_noise < 0.0) throw std::invalid_argument("obs_noise must be >= 0");
  size_t vocab = 0;
  for (const auto& cls : classes) {
    if (cls.empty()) {
      throw std::invalid_argument("each class needs at least one archetype");
    }
    for (const auto& arch : cls) {
      if (arch.weight <= 0.0) {
        throw std::invalid_argument("archetype weights must be positive");
      }
      if (arch.base_probs.empty()) {
        throw std::invalid_argument("archetype base_probs must be non-empty");
      }
      categorical::CategoricalDist check(arch.base_probs);  // validates
      if (vocab == 0) vocab = arch.base_probs.size();
      if (arch.base_probs.size() != vocab) {
        throw std::invalid_argument("archetypes must share one vocab size");
      }
      if (arch.correct_tokens.empty()) {
        throw std::invalid_argument("archetype needs at least one correct token");
      }
      for (int tok : arch.correct_tokens) {
        if (tok < 0 || tok >= static_cast<int>(vocab)) {
          throw std::invalid_argument("correct token outside the vocab");
        }
      }
    }
  }
  if (allowed_actions) {
    for (const auto& a : *allowed_actions) a.validate();
  }
}

TwoRegimeSpec TwoRegimeSpec::default_spec() {
  TwoRegimeSpec spec;
  spec.class_mix = 0.5;
  // Class 0: mostly well-posed instances where the argmax is right, plus a
  // deceptive minority. Greedy wins at budget 1, sampling wins at budget 8.
  spec.classes[0] = {
      {0.6, {0.75, 0.25 / 7, 0.25 / 7, 0.25 / 7, 0.25 / 7, 0.25 / 7, 0.25 / 7, 0.25 / 7}, {0}},
      {0.4, {0.25, 0.55, 0.2 / 6, 0.2 / 6, 0.2 / 6, 0.2 / 6, 0.2 / 6, 0.2 / 6}, {0}},
  };
  // Class 1: deceptive-dominant; sampling wins at every budget.
  spec.classes[1] = {
      {0.2, {0.8, 0.2 / 7, 0.2 / 7, 0.2 / 7, 0.2 / 7, 0.2 / 7, 0.2 / 7, 0.2 / 7}, {0}},
      {0.8, {0.35, 0.5, 0.15 / 6, 0.15 / 6, 0.15 / 6, 0.15 / 6, 0.15 / 6, 0.15 / 6}, {0}},
  };
  spec.obs_noise = 0.1;
  return spec;
}

TwoRegime::TwoRegime(TwoRegimeSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  vocab_ = static_cast<int>(spec_.classes[0].front().base_probs.size());
  for (int c = 0; c < 2; ++c) {
    for (const auto& arch : spec_.classes[static_cast<size_t>(c)]) {
      std::vector<double> z(arch.base_probs.size());
      for (size_t i = 0; i < z.size(); ++i) z[i] = safe_log(arch.base_probs[i]);
      logits_[static_cast<size_t>(c)].emplace_back(std::move(z));
    }
  }
}

Instance TwoRegime::make_instance(std::uint64_t instance_id) const {
  rng::Root structure(spec_.structure_seed);
  auto stream = structure.stream("tr-structure", instance_id);
  Instance inst;
  inst.id = instance_id;
  inst.class_id = stream.next_double() < spec_.class_mix ? 0 : 1;
  const auto& archetypes = spec_.classes[static_cast<size_t>(inst.class_id)];
  double total = 0.0;
  for (const auto& a : archetypes) total += a.weight;
  double u = stream.next_double() * total;
  double cumulative = 0.0;
  inst.archetype = static_cast<int>(archetypes.size()) - 1;
  for (size_t i = 0; i < archetypes.size(); ++i) {
    cumulative += archetypes[i].weight;
    if (u < cumulative) {
      inst.archetype = static_cast<int>(i);
      break;
    }
  }
  return inst;
}

const Archetype& TwoRegime::archetype_of(const Instance& instance) const {
  return spec_.classes[static_cast<size_t>(instance.class_id)]
                      [static_cast<size_t>(instance.archetype)];
}

std::vector<double> TwoRegime::context_features(const Instance& instance,
                                                rng::Stream& stream) const {
  return {(instance.class_id == 0 ? 1.0 : 0.0) +
              spec_.obs_noise * stream.next_gaussian(),
          (instance.class_id == 1 ? 1.0 : 0.0) +
              spec_.obs_noise * stream.next_gaussian()};
}

std::vector<double> TwoRegime::step_features(const Instance& instance,
                                             const RolloutState&,
                                             rng::Stream& stream) const {
  return context_features(instance, stream);
}

categorical::Logits TwoRegime::base_logits(const Instance& instance,
                                           const RolloutState&) const {
  return logits_[static_cast<size_t>(instance.class_id)]
                [static_cast<size_t>(instance.archetype)];
}

double TwoRegime::verify(const Instance& instance,
                         const RolloutState& state) const {
  if (state.tokens.empty()) return 0.0;
  const auto& correct = archetype_of(instance).correct_tokens;
  const int token = state.tokens.back();
  return std::find(correct.begin(), correct.end(), token) != correct.end()
             ? 1.0
             : 0.0;
}

void TwoRegime::check_allowed(const categorical::DecodingAction& action) const {
  if (!spec_.allowed_actions) return;
  for (const auto& a : *spec_.allowed_actions) {
    if (a == action) return;
  }
  throw std::invalid_argument("action not in the TwoRegime action table: " +
                              action.key());
}

double TwoRegime::static_rollout(const Instance& instance,
                                 const categorical::DecodingAction& action,
                                 rng::Stream& stream) const {
  check_allowed(action);
  return Environment::static_rollout(instance, action, stream);
}

double two_regime_rollout(const TwoRegime& env, const Instance& instance,
                          const categorical::DecodingAction& action,
                          rng::Stream& stream) {
  return env.static_rollout(instance, action, stream);
}

// ---- evaluation ------------------------------------------------------------

double pass_at_k(int num_samples, int num_correct, int k) {
  if (num_samples < 1) throw std::invalid_argument("pass_at_k: n must be >= 1");
  if (num_correct < 0 || num_correct > num_samples) {
    throw std::invalid_argument("pass_at_k: c must be in [0, n]");
  }
  if (k < 1 || k > num_samples) {
    throw std::invalid_argument("pass_at_k: k must be in [1, n]");
  }
  if (num_samples - num_correct < k) return 1.0;
  double miss = 1.0;
  for (int i = 0; i < k; ++i) {
    miss *= static_cast<double>(num_samples - num_correct - i) /
            static_cast<double>(num_samples - i);
  }
  return 1.0 - miss;
}

EvalSummary evaluate(const Environment& env, const RolloutFn& fn, int k,
                     int num_samples, int episodes,
                     std::uint64_t instance_id_base, const rng::Root& root,
                     std::string_view stream_label, int workers) {
  if (episodes < 2) throw std::invalid_argument("evaluate needs episodes >= 2");
  if (k < 1 || k > num_samples) {
    throw std::invalid_argument("evaluate: metric k exceeds samples per instance");
  }
  std::vector<double> values(static_cast<size_t>(episodes), 0.0);
  parallel_for(episodes, workers, [&](int i) {
    Instance instance =
        env.make_instance(instance_id_base + static_cast<std::uint64_t>(i));
    int correct = 0;
    for (int s = 0; s < num_samples; ++s) {
      auto stream = root.stream(stream_label, instance.id,
                                static_cast<std::uint64_t>(s));
      if (fn(instance, s, stream) > 0.5) ++correct;
    }
    values[static_cast<size_t>(i)] = pass_at_k(num_samples, correct, k);
  });
  double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                static_cast<double>(episodes);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(episodes - 1);
  EvalSummary summary;
  summary.mean = mean;
  summary.ci_half_width = 1.96 * std::sqrt(var / episodes);
  summary.episodes = episodes;
  return summary;
}

}  // namespace declab::env
