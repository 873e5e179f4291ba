#pragma once

/**
 * Run configuration: one strict JSON document describing an experiment.
 *
 * Parsing rejects unknown keys anywhere in the document (a typo in an RL
 * config should fail loudly, not fall back to a default). Every output file
 * the CLI writes embeds the fully resolved configuration produced by
 * to_json_text(), and re-running from that embedded document reproduces the
 * outputs byte for byte.
 */

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "declab/actions.hpp"
#include "declab/categorical.hpp"
#include "declab/env.hpp"
#include "declab/train.hpp"

namespace declab::harness {

using EnvSpecVariant = std::variant<env::ForkingChainSpec, env::TwoRegimeSpec>;

enum class AdapterKind { kSeq, kTok };

struct AdapterConfig {
  AdapterKind kind = AdapterKind::kSeq;
  bool budget_aware = false;
  std::vector<int> hidden = {32, 32};
  double dropout = 0.1;
  double policy_temperature = 1.0;
  int embed_hidden = 8;
  int embed_dim = 8;
};

struct ActionSourceConfig {
  enum class Source { kTokenDefault, kInline, kFile };
  Source source = Source::kTokenDefault;
  std::vector<categorical::DecodingAction> inline_actions;
  std::string path;
};

struct SelectionConfig {
  int k = 6;
  int num_instances = 200;
  int samples_per_cell = 4;
  actions::GridSpec grid = actions::GridSpec::default_sweep();
};

struct EvaluationConfig {
  /// Pass@k metric orders; must be a subset of {1, 2, 4, 8}.
  std::vector<int> metrics = {1, 8};
  int episodes = 2000;
  bool deterministic_policy = true;
  bool episode_log = false;
};

struct SweepConfig {
  std::vector<std::uint64_t> seeds;
};

struct RunConfig {
  std::string experiment = "run";
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  int workers = 1;
  EnvSpecVariant environment = env::TwoRegimeSpec::default_spec();
  ActionSourceConfig actions;
  SelectionConfig selection;
  AdapterConfig adapter;
  train::TrainConfig training;
  EvaluationConfig evaluation;
  SweepConfig sweep;

  /// Strict parse; throws ConfigError on unknown keys or invalid values.
  static RunConfig from_json_text(const std::string& text);
  static RunConfig load_file(const std::string& path);

  /// Canonical fully resolved form; parsing it back yields the same config.
  std::string to_json_text() const;

  void validate() const;
};

std::unique_ptr<env::Environment> make_environment(const EnvSpecVariant& spec);

/// Resolves the configured action source to a concrete action set.
actions::ActionSet resolve_action_set(const RunConfig& config);

}  // namespace declab::harness
