#include "declab/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "declab/errors.hpp"
#include "declab/policy.hpp"

namespace declab::harness {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw ConfigError("config section '" + path + "' must be an object");
  }
  for (const auto& item : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
          return item.key() == k;
        }) == allowed.end()) {
      throw ConfigError("unknown key '" + item.key() + "' in " + path);
    }
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

// ---- environment specs -----------------------------------------------------

json forking_to_json(const env::ForkingChainSpec& spec) {
  json j;
  j["type"] = "forking_chain";
  j["length"] = spec.length;
  j["fork_steps"] = spec.fork_steps;
  j["fork_viable_mass"] = spec.fork_viable_mass;
  j["offfork_noise_mass"] = spec.offfork_noise_mass;
  j["noise_support"] = spec.noise_support;
  j["vocab"] = spec.vocab;
  j["obs_noise"] = spec.obs_noise;
  j["structure_seed"] = spec.structure_seed;
  return j;
}

env::ForkingChainSpec forking_from_json(const json& j) {
  check_keys(j, "environment",
             {"type", "length", "fork_steps", "fork_viable_mass",
              "offfork_noise_mass", "noise_support", "vocab", "obs_noise",
              "structure_seed"});
  env::ForkingChainSpec spec;
  spec.length = get_or(j, "length", spec.length);
  spec.fork_steps = get_or(j, "fork_steps", spec.fork_steps);
  spec.fork_viable_mass = get_or(j, "fork_viable_mass", spec.fork_viable_mass);
  spec.offfork_noise_mass =
      get_or(j, "offfork_noise_mass", spec.offfork_noise_mass);
  spec.noise_support = get_or(j, "noise_support", spec.noise_support);
  spec.vocab = get_or(j, "vocab", spec.vocab);
  spec.obs_noise = get_or(j, "obs_noise", spec.obs_noise);
  spec.structure_seed = get_or(j, "structure_seed", spec.structure_seed);
  spec.validate();
  return spec;
}

json action_to_json_obj(const categorical::DecodingAction& a) {
  return json::parse(actions::action_to_json(a));
}

categorical::DecodingAction action_from_json_obj(const json& j) {
  return actions::action_from_json_text(j.dump());
}

json two_regime_to_json(const env::TwoRegimeSpec& spec) {
  json j;
  j["type"] = "two_regime";
  j["class_mix"] = spec.class_mix;
  j["classes"] = json::array();
  for (const auto& cls : spec.classes) {
    json archetypes = json::array();
    for (const auto& arch : cls) {
      archetypes.push_back({{"weight", arch.weight},
                            {"base_probs", arch.base_probs},
                            {"correct_tokens", arch.correct_tokens}});
    }
    j["classes"].push_back(std::move(archetypes));
  }
  j["obs_noise"] = spec.obs_noise;
  j["structure_seed"] = spec.structure_seed;
  if (spec.allowed_actions) {
    json allow = json::array();
    for (const auto& a : *spec.allowed_actions) allow.push_back(action_to_json_obj(a));
    j["allowed_actions"] = std::move(allow);
  }
  return j;
}

env::TwoRegimeSpec two_regime_from_json(const json& j) {
  check_keys(j, "environment",
             {"type", "class_mix", "classes", "obs_noise", "allowed_actions",
              "structure_seed"});
  env::TwoRegimeSpec spec = env::TwoRegimeSpec::default_spec();
  spec.class_mix = get_or(j, "class_mix", spec.class_mix);
  spec.obs_noise = get_or(j, "obs_noise", spec.obs_noise);
  spec.structure_seed = get_or(j, "structure_seed", spec.structure_seed);
  if (j.contains("classes")) {
    const auto& classes = j.at("classes");
    if (!classes.is_array() || classes.size() != 2) {
      throw ConfigError("two_regime 'classes' must list exactly two classes");
    }
    for (int c = 0; c < 2; ++c) {
      std::vector<env::Archetype> archetypes;
      for (const auto& a : classes.at(c)) {
        check_keys(a, "archetype", {"weight", "base_probs", "correct_tokens"});
        env::Archetype arch;
        arch.weight = a.at("weight").get<double>();
        arch.base_probs = a.at("base_probs").get<std::vector<double>>();
        arch.correct_tokens = a.at("correct_tokens").get<std::vector<int>>();
        archetypes.push_back(std::move(arch));
      }
      spec.classes[static_cast<size_t>(c)] = std::move(archetypes);
    }
  }
  if (j.contains("allowed_actions")) {
    std::vector<categorical::DecodingAction> allow;
    for (const auto& a : j.at("allowed_actions")) {
      allow.push_back(action_from_json_obj(a));
    }
    spec.allowed_actions = std::move(allow);
  }
  spec.validate();
  return spec;
}

// ---- grid -------------------------------------------------------------------

json grid_to_json(const actions::GridSpec& grid) {
  json j;
  j["temperatures"] = grid.temperatures;
  auto optional_list = [](const auto& values) {
    json arr = json::array();
    for (const auto& v : values) {
      if (v) {
        arr.push_back(*v);
      } else {
        arr.push_back("off");
      }
    }
    return arr;
  };
  j["top_ks"] = optional_list(grid.top_ks);
  j["top_ps"] = optional_list(grid.top_ps);
  j["min_ps"] = optional_list(grid.min_ps);
  return j;
}

actions::GridSpec grid_from_json(const json& j) {
  check_keys(j, "selection.grid", {"temperatures", "top_ks", "top_ps", "min_ps"});
  actions::GridSpec grid = actions::GridSpec::default_sweep();
  if (j.contains("temperatures")) {
    grid.temperatures = j.at("temperatures").get<std::vector<double>>();
  }
  auto parse_opt_int = [](const json& arr) {
    std::vector<std::optional<int>> out;
    for (const auto& v : arr) {
      if (v.is_string() && v.get<std::string>() == "off") {
        out.push_back(std::nullopt);
      } else if (v.is_null()) {
        out.push_back(std::nullopt);
      } else {
        out.push_back(v.get<int>());
      }
    }
    return out;
  };
  auto parse_opt_double = [](const json& arr) {
    std::vector<std::optional<double>> out;
    for (const auto& v : arr) {
      if (v.is_string() && v.get<std::string>() == "off") {
        out.push_back(std::nullopt);
      } else if (v.is_null()) {
        out.push_back(std::nullopt);
      } else {
        out.push_back(v.get<double>());
      }
    }
    return out;
  };
  if (j.contains("top_ks")) grid.top_ks = parse_opt_int(j.at("top_ks"));
  if (j.contains("top_ps")) grid.top_ps = parse_opt_double(j.at("top_ps"));
  if (j.contains("min_ps")) grid.min_ps = parse_opt_double(j.at("min_ps"));
  grid.validate();
  return grid;
}

// ---- training ---------------------------------------------------------------

json training_to_json(const train::TrainConfig& t) {
  json j;
  j["batch_size"] = t.batch_size;
  j["total_steps"] = t.total_steps;
  j["learning_rate"] = {{"base", t.learning_rate},
                        {"decay", t.lr_decay},
                        {"epoch_length", t.epoch_length}};
  j["entropy"] = {{"start", t.entropy_start}, {"end", t.entropy_end}};
  if (t.baseline_mode == train::BaselineMode::kBatchMean) {
    j["baseline"] = {{"mode", "batch-mean"}};
  } else {
    j["baseline"] = {{"mode", "ema"}, {"decay", t.ema_decay}};
  }
  j["budgets"] = t.budgets;
  j["token_budget"] = t.token_budget;
  j["mask_threshold"] = t.mask_threshold;
  j["prompt_filter"] = {{"enabled", t.prompt_filter.enabled},
                        {"min", t.prompt_filter.min_mean},
                        {"max", t.prompt_filter.max_mean},
                        {"window", t.prompt_filter.window}};
  j["train_pool_size"] = t.train_pool_size;
  j["eval_interval"] = t.eval_interval;
  j["eval_instances"] = t.eval_instances;
  j["eval_metric_k"] = t.eval_metric_k;
  j["checkpoint_interval"] = t.checkpoint_interval;
  return j;
}

train::TrainConfig training_from_json(const json& j) {
  check_keys(j, "training",
             {"batch_size", "total_steps", "learning_rate", "entropy",
              "baseline", "budgets", "token_budget", "mask_threshold",
              "prompt_filter", "train_pool_size", "eval_interval",
              "eval_instances", "eval_metric_k", "checkpoint_interval"});
  train::TrainConfig t;
  t.batch_size = get_or(j, "batch_size", t.batch_size);
  t.total_steps = get_or(j, "total_steps", t.total_steps);
  if (j.contains("learning_rate")) {
    const auto& lr = j.at("learning_rate");
    check_keys(lr, "training.learning_rate", {"base", "decay", "epoch_length"});
    t.learning_rate = get_or(lr, "base", t.learning_rate);
    t.lr_decay = get_or(lr, "decay", t.lr_decay);
    t.epoch_length = get_or(lr, "epoch_length", t.epoch_length);
  }
  if (j.contains("entropy")) {
    const auto& e = j.at("entropy");
    check_keys(e, "training.entropy", {"start", "end"});
    t.entropy_start = get_or(e, "start", t.entropy_start);
    t.entropy_end = get_or(e, "end", t.entropy_end);
  }
  if (j.contains("baseline")) {
    const auto& b = j.at("baseline");
    check_keys(b, "training.baseline", {"mode", "decay"});
    const std::string mode = b.at("mode").get<std::string>();
    if (mode == "batch-mean") {
      t.baseline_mode = train::BaselineMode::kBatchMean;
    } else if (mode == "ema") {
      t.baseline_mode = train::BaselineMode::kEma;
      t.ema_decay = get_or(b, "decay", t.ema_decay);
    } else {
      throw ConfigError("baseline mode must be 'batch-mean' or 'ema'");
    }
  }
  t.budgets = get_or(j, "budgets", t.budgets);
  t.token_budget = get_or(j, "token_budget", t.token_budget);
  t.mask_threshold = get_or(j, "mask_threshold", t.mask_threshold);
  if (j.contains("prompt_filter")) {
    const auto& f = j.at("prompt_filter");
    check_keys(f, "training.prompt_filter", {"enabled", "min", "max", "window"});
    t.prompt_filter.enabled = get_or(f, "enabled", t.prompt_filter.enabled);
    t.prompt_filter.min_mean = get_or(f, "min", t.prompt_filter.min_mean);
    t.prompt_filter.max_mean = get_or(f, "max", t.prompt_filter.max_mean);
    t.prompt_filter.window = get_or(f, "window", t.prompt_filter.window);
  }
  t.train_pool_size = get_or(j, "train_pool_size", t.train_pool_size);
  t.eval_interval = get_or(j, "eval_interval", t.eval_interval);
  t.eval_instances = get_or(j, "eval_instances", t.eval_instances);
  t.eval_metric_k = get_or(j, "eval_metric_k", t.eval_metric_k);
  t.checkpoint_interval = get_or(j, "checkpoint_interval", t.checkpoint_interval);
  t.validate();
  return t;
}

// ---- sections ---------------------------------------------------------------

json adapter_to_json(const AdapterConfig& a) {
  json j;
  j["kind"] = a.kind == AdapterKind::kSeq ? "seq" : "tok";
  j["budget_aware"] = a.budget_aware;
  j["hidden"] = a.hidden;
  j["dropout"] = a.dropout;
  j["policy_temperature"] = a.policy_temperature;
  j["embed_hidden"] = a.embed_hidden;
  j["embed_dim"] = a.embed_dim;
  return j;
}

AdapterConfig adapter_from_json(const json& j) {
  check_keys(j, "adapter",
             {"kind", "budget_aware", "hidden", "dropout", "policy_temperature",
              "embed_hidden", "embed_dim"});
  AdapterConfig a;
  const std::string kind = get_or<std::string>(j, "kind", "seq");
  if (kind == "seq") {
    a.kind = AdapterKind::kSeq;
  } else if (kind == "tok") {
    a.kind = AdapterKind::kTok;
  } else {
    throw ConfigError("adapter kind must be 'seq' or 'tok', got '" + kind + "'");
  }
  a.budget_aware = get_or(j, "budget_aware", a.budget_aware);
  a.hidden = get_or(j, "hidden", a.hidden);
  a.dropout = get_or(j, "dropout", a.dropout);
  a.policy_temperature = get_or(j, "policy_temperature", a.policy_temperature);
  a.embed_hidden = get_or(j, "embed_hidden", a.embed_hidden);
  a.embed_dim = get_or(j, "embed_dim", a.embed_dim);
  return a;
}

json actions_to_json(const ActionSourceConfig& a) {
  json j;
  switch (a.source) {
    case ActionSourceConfig::Source::kTokenDefault:
      j["source"] = "token-default";
      break;
    case ActionSourceConfig::Source::kInline: {
      j["source"] = "inline";
      json list = json::array();
      for (const auto& act : a.inline_actions) list.push_back(action_to_json_obj(act));
      j["actions"] = std::move(list);
      break;
    }
    case ActionSourceConfig::Source::kFile:
      j["source"] = "file";
      j["path"] = a.path;
      break;
  }
  return j;
}

ActionSourceConfig actions_from_json(const json& j) {
  check_keys(j, "actions", {"source", "actions", "path"});
  ActionSourceConfig a;
  const std::string source = j.at("source").get<std::string>();
  if (source == "token-default") {
    a.source = ActionSourceConfig::Source::kTokenDefault;
  } else if (source == "inline") {
    a.source = ActionSourceConfig::Source::kInline;
    if (!j.contains("actions")) {
      throw ConfigError("inline action source requires an 'actions' list");
    }
    for (const auto& act : j.at("actions")) {
      a.inline_actions.push_back(action_from_json_obj(act));
    }
    if (a.inline_actions.empty()) {
      throw ConfigError("inline action list must be non-empty");
    }
  } else if (source == "file") {
    a.source = ActionSourceConfig::Source::kFile;
    a.path = j.at("path").get<std::string>();
  } else {
    throw ConfigError("action source must be token-default, inline or file");
  }
  return a;
}

json selection_to_json(const SelectionConfig& s) {
  json j;
  j["k"] = s.k;
  j["num_instances"] = s.num_instances;
  j["samples_per_cell"] = s.samples_per_cell;
  j["grid"] = grid_to_json(s.grid);
  return j;
}

SelectionConfig selection_from_json(const json& j) {
  check_keys(j, "selection", {"k", "num_instances", "samples_per_cell", "grid"});
  SelectionConfig s;
  s.k = get_or(j, "k", s.k);
  s.num_instances = get_or(j, "num_instances", s.num_instances);
  s.samples_per_cell = get_or(j, "samples_per_cell", s.samples_per_cell);
  if (j.contains("grid")) s.grid = grid_from_json(j.at("grid"));
  if (s.k < 1) throw ConfigError("selection.k must be >= 1");
  if (s.num_instances < 1) throw ConfigError("selection.num_instances must be >= 1");
  if (s.samples_per_cell < 1) {
    throw ConfigError("selection.samples_per_cell must be >= 1");
  }
  return s;
}

json evaluation_to_json(const EvaluationConfig& e) {
  json j;
  json metrics = json::array();
  for (int k : e.metrics) metrics.push_back("pass@" + std::to_string(k));
  j["metrics"] = std::move(metrics);
  j["episodes"] = e.episodes;
  j["deterministic_policy"] = e.deterministic_policy;
  j["episode_log"] = e.episode_log;
  return j;
}

EvaluationConfig evaluation_from_json(const json& j) {
  check_keys(j, "evaluation",
             {"metrics", "episodes", "deterministic_policy", "episode_log"});
  EvaluationConfig e;
  if (j.contains("metrics")) {
    e.metrics.clear();
    for (const auto& m : j.at("metrics")) {
      const std::string name = m.get<std::string>();
      if (name.rfind("pass@", 0) != 0) {
        throw ConfigError("metric must look like 'pass@k': " + name);
      }
      int k = 0;
      try {
        k = std::stoi(name.substr(5));
      } catch (...) {
        throw ConfigError("metric must look like 'pass@k': " + name);
      }
      if (k != 1 && k != 2 && k != 4 && k != 8) {
        throw ConfigError("metrics must be within {pass@1, pass@2, pass@4, pass@8}");
      }
      e.metrics.push_back(k);
    }
    if (e.metrics.empty()) throw ConfigError("metrics list must be non-empty");
  }
  e.episodes = get_or(j, "episodes", e.episodes);
  e.deterministic_policy = get_or(j, "deterministic_policy", e.deterministic_policy);
  e.episode_log = get_or(j, "episode_log", e.episode_log);
  if (e.episodes < 2) throw ConfigError("evaluation.episodes must be >= 2");
  return e;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config",
             {"experiment", "seed", "output_dir", "workers", "environment",
              "actions", "selection", "adapter", "training", "evaluation",
              "sweep"});
  for (const char* required : {"experiment", "seed", "environment", "output_dir"}) {
    if (!j.contains(required)) {
      throw ConfigError(std::string("config is missing required field '") +
                        required + "'");
    }
  }
  RunConfig config;
  config.experiment = j.at("experiment").get<std::string>();
  config.seed = j.at("seed").get<std::uint64_t>();
  config.output_dir = j.at("output_dir").get<std::string>();
  config.workers = get_or(j, "workers", config.workers);
  if (config.workers < 1) throw ConfigError("workers must be >= 1");

  const auto& envj = j.at("environment");
  if (!envj.is_object() || !envj.contains("type")) {
    throw ConfigError("environment needs a 'type' field");
  }
  const std::string type = envj.at("type").get<std::string>();
  if (type == "forking_chain") {
    config.environment = forking_from_json(envj);
  } else if (type == "two_regime") {
    config.environment = two_regime_from_json(envj);
  } else {
    throw ConfigError("unknown environment type '" + type + "'");
  }

  if (j.contains("actions")) config.actions = actions_from_json(j.at("actions"));
  if (j.contains("selection")) {
    config.selection = selection_from_json(j.at("selection"));
  }
  if (j.contains("adapter")) config.adapter = adapter_from_json(j.at("adapter"));
  if (j.contains("training")) config.training = training_from_json(j.at("training"));
  if (j.contains("evaluation")) {
    config.evaluation = evaluation_from_json(j.at("evaluation"));
  }
  if (j.contains("sweep")) {
    check_keys(j.at("sweep"), "sweep", {"seeds"});
    config.sweep.seeds =
        get_or(j.at("sweep"), "seeds", std::vector<std::uint64_t>{});
  }
  config.training.workers = config.workers;
  config.validate();
  return config;
}

RunConfig RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

std::string RunConfig::to_json_text() const {
  json j;
  j["experiment"] = experiment;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["workers"] = workers;
  if (std::holds_alternative<env::ForkingChainSpec>(environment)) {
    j["environment"] = forking_to_json(std::get<env::ForkingChainSpec>(environment));
  } else {
    j["environment"] = two_regime_to_json(std::get<env::TwoRegimeSpec>(environment));
  }
  j["actions"] = actions_to_json(actions);
  j["selection"] = selection_to_json(selection);
  j["adapter"] = adapter_to_json(adapter);
  j["training"] = training_to_json(training);
  j["evaluation"] = evaluation_to_json(evaluation);
  j["sweep"] = {{"seeds", sweep.seeds}};
  return j.dump(2);
}

void RunConfig::validate() const {
  if (experiment.empty()) throw ConfigError("experiment name must be non-empty");
  if (output_dir.empty()) throw ConfigError("output_dir must be non-empty");
  training.validate();
  std::visit([](const auto& spec) { spec.validate(); }, environment);
}

std::unique_ptr<env::Environment> make_environment(const EnvSpecVariant& spec) {
  if (std::holds_alternative<env::ForkingChainSpec>(spec)) {
    return std::make_unique<env::ForkingChain>(
        std::get<env::ForkingChainSpec>(spec));
  }
  return std::make_unique<env::TwoRegime>(std::get<env::TwoRegimeSpec>(spec));
}

actions::ActionSet resolve_action_set(const RunConfig& config) {
  switch (config.actions.source) {
    case ActionSourceConfig::Source::kTokenDefault:
      return policy::token_default_action_set();
    case ActionSourceConfig::Source::kInline: {
      actions::ActionSet set;
      set.actions = config.actions.inline_actions;
      return set;
    }
    case ActionSourceConfig::Source::kFile: {
      std::ifstream in(config.actions.path);
      if (!in) {
        throw ConfigError("cannot open action-set file: " + config.actions.path);
      }
      std::stringstream buffer;
      buffer << in.rdbuf();
      return actions::action_set_from_json(buffer.str());
    }
  }
  throw ConfigError("unreachable action source");
}

}  // namespace declab::harness
