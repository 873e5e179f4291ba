#include "declab/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "declab/errors.hpp"
#include "declab/format.hpp"
#include "declab/policy.hpp"
#include "declab/report.hpp"
#include "declab/train.hpp"

namespace declab::harness {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig load_config(const CliOptions& options) {
  if (options.config_path.empty()) {
    throw ConfigError("--config is required");
  }
  RunConfig config = RunConfig::load_file(options.config_path);
  if (options.seed_override) config.seed = *options.seed_override;
  if (options.out_override) config.output_dir = *options.out_override;
  if (options.workers_override) {
    if (*options.workers_override < 1) {
      throw ConfigError("--workers must be >= 1");
    }
    config.workers = *options.workers_override;
  }
  config.training.workers = config.workers;
  config.validate();
  return config;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string config_comment(const RunConfig& config) {
  json j = json::parse(config.to_json_text());
  std::ostringstream out;
  out << "# config: " << j.dump() << '\n';
  out << "# seed: " << config.seed << '\n';
  return out.str();
}

int policy_feature_dim(const RunConfig& config, const env::Environment& environment) {
  int dim = environment.obs_dim();
  if (config.adapter.kind == AdapterKind::kTok && config.adapter.budget_aware) {
    dim += 1;  // normalized remaining-budget feature
  }
  return dim;
}

policy::PolicyConfig make_policy_config(const RunConfig& config) {
  policy::PolicyConfig pc;
  pc.hidden = config.adapter.hidden;
  pc.dropout = config.adapter.dropout;
  pc.policy_temperature = config.adapter.policy_temperature;
  pc.budget = (config.adapter.kind == AdapterKind::kSeq &&
               config.adapter.budget_aware)
                  ? policy::BudgetMode::kEmbedded
                  : policy::BudgetMode::kNone;
  pc.embed_hidden = config.adapter.embed_hidden;
  pc.embed_dim = config.adapter.embed_dim;
  return pc;
}

net::AdamConfig make_adam_config(const RunConfig& config) {
  net::AdamConfig adam;
  adam.learning_rate = config.training.learning_rate;
  adam.lr_decay = config.training.lr_decay;
  return adam;
}

json action_set_json(const actions::ActionSet& set) {
  json list = json::array();
  for (const auto& a : set.actions) {
    list.push_back(json::parse(actions::action_to_json(a)));
  }
  return list;
}

bool same_action_set(const actions::ActionSet& a, const actions::ActionSet& b) {
  if (a.actions.size() != b.actions.size()) return false;
  for (size_t i = 0; i < a.actions.size(); ++i) {
    if (!(a.actions[i] == b.actions[i])) return false;
  }
  return true;
}

// ---- checkpoint sidecar ------------------------------------------------------

struct TrainBundle {
  std::unique_ptr<policy::Policy> policy;
  std::unique_ptr<net::AdamState> trunk_opt;
  std::unique_ptr<net::AdamState> embed_opt;
  train::TrainState state;
};

json train_state_to_json(const train::TrainState& state) {
  json windows = json::array();
  for (const auto& [id, window] : state.reward_windows) {
    windows.push_back({{"instance", id},
                       {"rewards", std::vector<double>(window.begin(), window.end())}});
  }
  return json{{"completed_steps", state.completed_steps},
              {"ema_baseline", state.ema_baseline},
              {"reward_windows", std::move(windows)}};
}

train::TrainState train_state_from_json(const json& j) {
  train::TrainState state;
  state.completed_steps = j.at("completed_steps").get<int>();
  state.ema_baseline = j.at("ema_baseline").get<double>();
  for (const auto& w : j.at("reward_windows")) {
    auto rewards = w.at("rewards").get<std::vector<double>>();
    state.reward_windows[w.at("instance").get<std::uint64_t>()] =
        std::deque<double>(rewards.begin(), rewards.end());
  }
  return state;
}

void save_train_checkpoint(const fs::path& path, const RunConfig& config,
                           const actions::ActionSet& set,
                           const TrainBundle& bundle) {
  json extra;
  extra["experiment"] = config.experiment;
  extra["seed"] = config.seed;
  extra["adapter"] = {
      {"kind", config.adapter.kind == AdapterKind::kSeq ? "seq" : "tok"},
      {"budget_aware", config.adapter.budget_aware},
      {"hidden", config.adapter.hidden},
      {"dropout", config.adapter.dropout},
      {"policy_temperature", config.adapter.policy_temperature},
      {"embed_hidden", config.adapter.embed_hidden},
      {"embed_dim", config.adapter.embed_dim},
  };
  extra["action_set"] = action_set_json(set);
  extra["train_state"] = train_state_to_json(bundle.state);
  extra["config"] = json::parse(config.to_json_text());

  std::vector<net::CheckpointEntry> entries;
  entries.push_back({"trunk", &bundle.policy->trunk(), bundle.trunk_opt.get()});
  if (bundle.policy->budget_aware()) {
    entries.push_back({"budget_embedder", &bundle.policy->embedder(),
                       bundle.embed_opt.get()});
  }
  net::save_checkpoint_file(path.string(), entries, extra.dump());
}

struct LoadedTrainCheckpoint {
  TrainBundle bundle;
  actions::ActionSet action_set;
  std::string kind;
  bool budget_aware = false;
};

// Reconstructs the adapter from the checkpoint's own recorded architecture;
// the run config only has to agree on the adapter kind and action set.
LoadedTrainCheckpoint load_train_checkpoint(const std::string& path,
                                            const RunConfig& config) {
  auto loaded = net::load_checkpoint_file(path);
  if (loaded.extra.empty()) {
    throw ConfigError("checkpoint has no metadata: " + path);
  }
  json extra = json::parse(loaded.extra);
  LoadedTrainCheckpoint result;
  const auto& adapter_meta = extra.at("adapter");
  result.kind = adapter_meta.at("kind").get<std::string>();
  result.budget_aware = adapter_meta.at("budget_aware").get<bool>();
  for (const auto& a : extra.at("action_set")) {
    result.action_set.actions.push_back(
        actions::action_from_json_text(a.dump()));
  }
  result.bundle.state = train_state_from_json(extra.at("train_state"));

  auto find_net = [&](const std::string& name) -> const net::LoadedNet* {
    for (const auto& n : loaded.nets) {
      if (n.name == name) return &n;
    }
    return nullptr;
  };
  const net::LoadedNet* trunk = find_net("trunk");
  if (!trunk) throw ConfigError("checkpoint is missing the trunk net");
  const net::LoadedNet* embed = find_net("budget_embedder");

  policy::PolicyConfig pc;
  pc.hidden = adapter_meta.at("hidden").get<std::vector<int>>();
  pc.dropout = adapter_meta.at("dropout").get<double>();
  pc.policy_temperature = adapter_meta.at("policy_temperature").get<double>();
  pc.budget = (result.kind == "seq" && result.budget_aware)
                  ? policy::BudgetMode::kEmbedded
                  : policy::BudgetMode::kNone;
  pc.embed_hidden = adapter_meta.at("embed_hidden").get<int>();
  pc.embed_dim = adapter_meta.at("embed_dim").get<int>();

  const int feature_dim =
      trunk->spec.dims.front() -
      (pc.budget == policy::BudgetMode::kEmbedded ? pc.embed_dim : 0);
  result.bundle.policy = std::make_unique<policy::Policy>(
      feature_dim, result.action_set, pc, trunk->params,
      embed ? embed->params : std::vector<double>{});

  auto restore_opt = [](const net::LoadedNet& n) {
    auto opt = std::make_unique<net::AdamState>(n.params.size(), n.optimizer_config);
    opt->first_moment() = n.first_moment;
    opt->second_moment() = n.second_moment;
    opt->restore(n.steps, n.epochs);
    return opt;
  };
  if (!trunk->has_optimizer) {
    throw ConfigError("checkpoint is missing optimizer state");
  }
  result.bundle.trunk_opt = restore_opt(*trunk);
  if (embed) {
    result.bundle.embed_opt = restore_opt(*embed);
  } else {
    result.bundle.embed_opt = std::make_unique<net::AdamState>(
        result.bundle.policy->embedder().param_count(), make_adam_config(config));
  }
  return result;
}

// ---- trace csv ---------------------------------------------------------------

std::string trace_to_csv(const RunConfig& config,
                         const std::vector<train::TraceRow>& rows,
                         int num_actions) {
  std::ostringstream out;
  out << config_comment(config);
  out << "step,mean_reward,baseline,policy_entropy";
  for (int a = 0; a < num_actions; ++a) out << ",p_action" << a;
  out << ",validation\n";
  for (const auto& row : rows) {
    out << row.step << ',' << format_double(row.mean_reward) << ','
        << format_double(row.baseline) << ',' << format_double(row.mean_entropy);
    for (double p : row.action_probs) out << ',' << format_double(p);
    out << ',';
    if (row.validation) out << format_double(*row.validation);
    out << '\n';
  }
  return out.str();
}

// ---- rollout adapters ----------------------------------------------------------

env::RolloutFn static_action_fn(const env::Environment& environment,
                                const categorical::DecodingAction& action) {
  return [&environment, action](const env::Instance& instance, int,
                                rng::Stream& stream) {
    return environment.static_rollout(instance, action, stream);
  };
}

env::RolloutFn mixed_static_fn(const env::Environment& environment,
                               const actions::ActionSet& set) {
  return [&environment, &set](const env::Instance& instance, int,
                              rng::Stream& stream) {
    const auto& action =
        set.actions[stream.next_below(set.actions.size())];
    return environment.static_rollout(instance, action, stream);
  };
}

env::RolloutFn seq_adapter_fn(const env::Environment& environment,
                              const policy::SeqPolicy& policy, int budget,
                              bool deterministic) {
  return [&environment, &policy, budget, deterministic](
             const env::Instance& instance, int, rng::Stream& stream) {
    auto features = environment.context_features(instance, stream);
    auto choice = policy.select(features, static_cast<double>(budget),
                                deterministic, stream);
    return environment.static_rollout(
        instance, policy.action_set().actions[static_cast<size_t>(choice.index)],
        stream);
  };
}

env::RolloutFn tok_adapter_fn(const env::Environment& environment,
                              const policy::TokPolicy& policy,
                              bool budget_feature, int token_budget,
                              bool deterministic) {
  return [&environment, &policy, budget_feature, token_budget, deterministic](
             const env::Instance& instance, int, rng::Stream& stream) {
    env::StepController controller = [&](std::span<const double> features,
                                         int remaining, int budget,
                                         rng::Stream& s) {
      if (budget_feature) {
        auto x = policy::tok_features(features, remaining, budget);
        return policy.select(x, std::nullopt, deterministic, s).index;
      }
      return policy.select(features, std::nullopt, deterministic, s).index;
    };
    return env::rollout(environment, instance, policy.action_set().actions,
                        controller, token_budget, stream)
        .reward;
  };
}

MetricStat to_stat(const env::EvalSummary& summary) {
  return MetricStat{summary.mean, summary.ci_half_width, summary.episodes};
}

}  // namespace

// ---- select-actions ------------------------------------------------------------

void cmd_select_actions(const CliOptions& options) {
  RunConfig config = load_config(options);
  auto environment = make_environment(config.environment);
  auto pool = actions::build_candidate_pool(config.selection.grid);
  if (config.selection.k > pool.size()) {
    throw ConfigError("selection.k exceeds the candidate pool size");
  }
  rng::Root root(config.seed);

  auto matrix = actions::estimate_reward_matrix(
      *environment, pool, config.selection.num_instances,
      config.selection.samples_per_cell, root, /*instance_id_base=*/0,
      config.workers);

  fs::create_directories(config.output_dir);
  {
    std::ostringstream csv;
    csv << config_comment(config);
    matrix.to_csv(csv);
    write_file(fs::path(config.output_dir) / "reward_matrix.csv", csv.str());
  }

  auto emit = [&](const actions::ActionSet& set, const std::string& method,
                  const std::string& filename) {
    json j = json::parse(actions::action_set_to_json(set, matrix.num_instances()));
    j["method"] = method;
    j["config"] = json::parse(config.to_json_text());
    j["seed"] = config.seed;
    write_file(fs::path(config.output_dir) / filename, j.dump(2) + "\n");
  };
  emit(actions::greedy_select(matrix, pool, config.selection.k), "greedy",
       "actions_greedy.json");
  emit(actions::topk_by_mean_select(matrix, pool, config.selection.k),
       "topk-by-mean", "actions_topk_by_mean.json");
}

// ---- train ----------------------------------------------------------------------

void cmd_train(const CliOptions& options) {
  RunConfig config = load_config(options);
  auto environment = make_environment(config.environment);
  actions::ActionSet set = resolve_action_set(config);
  if (set.actions.empty()) throw ConfigError("resolved action set is empty");
  rng::Root root(config.seed);

  if (options.checkpoints.size() > 1) {
    throw ConfigError("train accepts at most one --checkpoint to resume from");
  }
  TrainBundle bundle;
  if (!options.checkpoints.empty()) {
    auto loaded = load_train_checkpoint(options.checkpoints.front(), config);
    const std::string kind =
        config.adapter.kind == AdapterKind::kSeq ? "seq" : "tok";
    if (loaded.kind != kind) {
      throw ConfigError("checkpoint adapter kind does not match config");
    }
    if (!same_action_set(loaded.action_set, set)) {
      throw ConfigError("checkpoint action set does not match config");
    }
    if (loaded.budget_aware != config.adapter.budget_aware) {
      throw ConfigError("checkpoint budget-awareness does not match config");
    }
    bundle = std::move(loaded.bundle);
  } else {
    auto init = root.stream("policy-init");
    policy::PolicyConfig pc = make_policy_config(config);
    const int feature_dim = policy_feature_dim(config, *environment);
    bundle.policy = std::make_unique<policy::Policy>(feature_dim, set, pc, init);
    bundle.trunk_opt = std::make_unique<net::AdamState>(
        bundle.policy->trunk().param_count(), make_adam_config(config));
    bundle.embed_opt = std::make_unique<net::AdamState>(
        bundle.policy->embedder().param_count(), make_adam_config(config));
  }

  if (bundle.state.completed_steps >= config.training.total_steps) {
    throw ConfigError("checkpoint is already at or past total_steps");
  }

  fs::create_directories(config.output_dir);
  const bool is_seq = config.adapter.kind == AdapterKind::kSeq;
  std::vector<train::TraceRow> trace;
  const int interval = config.training.checkpoint_interval;
  while (bundle.state.completed_steps < config.training.total_steps) {
    int until = config.training.total_steps;
    if (interval > 0) {
      until = std::min(until, bundle.state.completed_steps + interval);
    }
    train::TrainResult segment =
        is_seq ? train::train_seq(*bundle.policy, *environment, config.training,
                                  bundle.state, *bundle.trunk_opt,
                                  *bundle.embed_opt, root, until)
               : train::train_tok(*bundle.policy, *environment, config.training,
                                  bundle.state, *bundle.trunk_opt,
                                  *bundle.embed_opt, root, until);
    trace.insert(trace.end(), segment.trace.begin(), segment.trace.end());
    if (interval > 0 &&
        bundle.state.completed_steps < config.training.total_steps) {
      save_train_checkpoint(
          fs::path(config.output_dir) /
              ("checkpoint_step" + std::to_string(bundle.state.completed_steps) +
               ".ckpt"),
          config, set, bundle);
    }
  }

  write_file(fs::path(config.output_dir) / "trace.csv",
             trace_to_csv(config, trace, bundle.policy->num_actions()));
  save_train_checkpoint(fs::path(config.output_dir) / "checkpoint_final.ckpt",
                        config, set, bundle);
}

// ---- eval -----------------------------------------------------------------------

void cmd_eval(const CliOptions& options) {
  RunConfig config = load_config(options);
  auto environment = make_environment(config.environment);
  actions::ActionSet set = resolve_action_set(config);
  rng::Root root(config.seed);

  struct AdapterColumn {
    std::unique_ptr<policy::Policy> policy;
    bool budget_aware = false;
    std::string kind;
  };
  std::vector<AdapterColumn> adapters;
  for (const auto& path : options.checkpoints) {
    auto loaded = load_train_checkpoint(path, config);
    if (!same_action_set(loaded.action_set, set)) {
      throw ConfigError(
          "checkpoint action set is incompatible with the configured action set");
    }
    const std::string kind =
        config.adapter.kind == AdapterKind::kSeq ? "seq" : "tok";
    if (loaded.kind != kind) {
      throw ConfigError("checkpoint adapter kind does not match config");
    }
    for (const auto& existing : adapters) {
      if (existing.budget_aware == loaded.budget_aware) {
        throw ConfigError("two checkpoints map to the same adapter column");
      }
    }
    const int expected_dim =
        environment->obs_dim() +
        (loaded.kind == "tok" && loaded.budget_aware ? 1 : 0);
    if (loaded.bundle.policy->feature_dim() != expected_dim) {
      throw ConfigError("checkpoint feature dimension does not fit the "
                        "configured environment");
    }
    adapters.push_back({std::move(loaded.bundle.policy), loaded.budget_aware,
                        loaded.kind});
  }

  RunReport report;
  report.metric_ks = config.evaluation.metrics;
  const int episodes = config.evaluation.episodes;
  const int token_budget = config.training.token_budget > 0
                               ? config.training.token_budget
                               : environment->horizon();

  // Per-action static rows back the best-static column.
  std::vector<MethodRow> statics;
  for (size_t a = 0; a < set.actions.size(); ++a) {
    MethodRow row;
    row.method = "static:" + set.actions[a].key();
    for (int k : report.metric_ks) {
      auto fn = static_action_fn(*environment, set.actions[a]);
      row.by_metric[k] = to_stat(env::evaluate(
          *environment, fn, k, k, episodes, kEvalInstanceBase, root,
          "eval-static-" + std::to_string(a) + "-k" + std::to_string(k),
          config.workers));
    }
    statics.push_back(std::move(row));
  }

  MethodRow best;
  best.method = "best-static";
  for (int k : report.metric_ks) {
    const MethodRow* winner = nullptr;
    for (const auto& row : statics) {
      if (!winner ||
          row.by_metric.at(k).mean > winner->by_metric.at(k).mean) {
        winner = &row;
      }
    }
    best.by_metric[k] = winner->by_metric.at(k);
  }

  MethodRow mixed;
  mixed.method = "mixed-static";
  for (int k : report.metric_ks) {
    auto fn = mixed_static_fn(*environment, set);
    mixed.by_metric[k] = to_stat(
        env::evaluate(*environment, fn, k, k, episodes, kEvalInstanceBase, root,
                      "eval-mixed-k" + std::to_string(k), config.workers));
  }

  report.methods.push_back(std::move(best));
  report.methods.push_back(std::move(mixed));

  for (size_t column = 0; column < adapters.size(); ++column) {
    const auto& adapter = adapters[column];
    MethodRow row;
    row.method =
        adapter.budget_aware ? "adapter-budget" : "adapter-no-budget";
    const bool deterministic = config.evaluation.deterministic_policy;
    for (int k : report.metric_ks) {
      env::RolloutFn fn =
          adapter.kind == "seq"
              ? seq_adapter_fn(*environment, *adapter.policy, k, deterministic)
              : tok_adapter_fn(*environment, *adapter.policy,
                               adapter.budget_aware, token_budget,
                               deterministic);
      row.by_metric[k] = to_stat(env::evaluate(
          *environment, fn, k, k, episodes, kEvalInstanceBase, root,
          "eval-adapter-" + std::to_string(column) + "-k" + std::to_string(k),
          config.workers));
    }
    report.methods.push_back(std::move(row));
  }
  report.static_details = std::move(statics);

  fs::create_directories(config.output_dir);
  write_file(fs::path(config.output_dir) / "report.json",
             report.to_json(config.to_json_text(), config.seed) + "\n");
  write_file(fs::path(config.output_dir) / "report.csv",
             report.to_csv(config.to_json_text(), config.seed));

  if (config.evaluation.episode_log && !adapters.empty()) {
    const auto& adapter_col = adapters.front();
    const policy::Policy* adapter = adapter_col.policy.get();
    const bool adapter_budget_aware = adapter_col.budget_aware;
    const std::string& adapter_kind = adapter_col.kind;
    std::ostringstream log;
    {
      json header;
      header["config"] = json::parse(config.to_json_text());
      header["seed"] = config.seed;
      log << header.dump() << '\n';
    }
    const int k = report.metric_ks.front();
    for (int i = 0; i < episodes; ++i) {
      auto instance =
          environment->make_instance(kEvalInstanceBase + static_cast<std::uint64_t>(i));
      for (int s = 0; s < k; ++s) {
        auto stream = root.stream("episode-log", instance.id,
                                  static_cast<std::uint64_t>(s));
        json line;
        if (adapter_kind == "seq") {
          auto features = environment->context_features(instance, stream);
          auto choice = adapter->select(features, static_cast<double>(k),
                                        config.evaluation.deterministic_policy,
                                        stream);
          double reward = environment->static_rollout(
              instance,
              adapter->action_set().actions[static_cast<size_t>(choice.index)],
              stream);
          line = {{"instance", instance.id},
                  {"actions", std::vector<int>{choice.index}},
                  {"reward", reward},
                  {"length", environment->horizon()}};
        } else {
          env::StepController controller = [&](std::span<const double> features,
                                               int remaining, int budget,
                                               rng::Stream& st) {
            if (adapter_budget_aware) {
              auto x = policy::tok_features(features, remaining, budget);
              return adapter
                  ->select(x, std::nullopt,
                           config.evaluation.deterministic_policy, st)
                  .index;
            }
            return adapter
                ->select(features, std::nullopt,
                         config.evaluation.deterministic_policy, st)
                .index;
          };
          auto episode =
              env::rollout(*environment, instance, adapter->action_set().actions,
                           controller, token_budget, stream);
          std::vector<int> taken;
          for (const auto& d : episode.decisions) taken.push_back(d.action_index);
          line = {{"instance", instance.id},
                  {"actions", taken},
                  {"reward", episode.reward},
                  {"length", episode.length()}};
        }
        log << line.dump() << '\n';
      }
    }
    write_file(fs::path(config.output_dir) / "episodes.jsonl", log.str());
  }
}

// ---- sweep ----------------------------------------------------------------------

namespace {

double t_critical(int df) {
  static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447,
                                 2.365,  2.306, 2.262, 2.228, 2.201, 2.179,
                                 2.160,  2.145, 2.131, 2.120, 2.110, 2.101,
                                 2.093,  2.086, 2.080, 2.074, 2.069, 2.064,
                                 2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
  if (df < 1) return 0.0;
  if (df <= 30) return table[df - 1];
  return 1.96;
}

}  // namespace

void cmd_sweep(const CliOptions& options) {
  RunConfig config = load_config(options);
  if (config.sweep.seeds.empty()) {
    throw ConfigError("sweep requires a non-empty sweep.seeds list");
  }

  struct Cell {
    std::uint64_t seed;
    bool ok = false;
    std::string error;
    std::map<int, double> adapter_mean;  // metric k -> mean
  };
  std::vector<Cell> cells;

  const fs::path out_root(config.output_dir);
  fs::create_directories(out_root);

  for (std::uint64_t seed : config.sweep.seeds) {
    Cell cell;
    cell.seed = seed;
    const fs::path run_dir = out_root / ("seed" + std::to_string(seed));
    try {
      CliOptions child = options;
      child.seed_override = seed;
      child.out_override = run_dir.string();
      child.checkpoints.clear();
      cmd_train(child);
      CliOptions eval_child = child;
      eval_child.checkpoints = {(run_dir / "checkpoint_final.ckpt").string()};
      cmd_eval(eval_child);

      std::ifstream in(run_dir / "report.json");
      std::stringstream buffer;
      buffer << in.rdbuf();
      json report = json::parse(buffer.str());
      for (const auto& method : report.at("methods")) {
        const std::string name = method.at("method").get<std::string>();
        if (name.rfind("adapter", 0) != 0) continue;
        for (const auto& [metric, stat] : method.at("metrics").items()) {
          const int k = std::stoi(metric.substr(5));
          cell.adapter_mean[k] = stat.at("mean").get<double>();
        }
      }
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
    cells.push_back(std::move(cell));
  }

  std::ostringstream csv;
  csv << config_comment(config);
  csv << "seed,status,metric,adapter_mean,ci_half\n";
  for (const auto& cell : cells) {
    if (!cell.ok) {
      csv << cell.seed << ",failed,,,\n";
      continue;
    }
    for (const auto& [k, mean] : cell.adapter_mean) {
      csv << cell.seed << ",ok,pass@" << k << ',' << format_double(mean)
          << ",\n";
    }
  }
  // Across-seed summary with a t-distribution interval over seed means.
  for (int k : config.evaluation.metrics) {
    std::vector<double> means;
    for (const auto& cell : cells) {
      if (cell.ok && cell.adapter_mean.count(k)) {
        means.push_back(cell.adapter_mean.at(k));
      }
    }
    if (means.empty()) continue;
    const double mean = std::accumulate(means.begin(), means.end(), 0.0) /
                        static_cast<double>(means.size());
    csv << "summary,ok,pass@" << k << ',' << format_double(mean) << ',';
    if (means.size() >= 2) {
      double var = 0.0;
      for (double m : means) var += (m - mean) * (m - mean);
      var /= static_cast<double>(means.size() - 1);
      const double half = t_critical(static_cast<int>(means.size()) - 1) *
                          std::sqrt(var / static_cast<double>(means.size()));
      csv << format_double(half);
    } else {
      csv << "n/a";
    }
    csv << '\n';
  }
  write_file(out_root / "sweep.csv", csv.str());

  for (const auto& cell : cells) {
    if (!cell.ok) {
      throw std::runtime_error("sweep child failed (seed " +
                               std::to_string(cell.seed) + "): " + cell.error);
    }
  }
}

int run_command(const std::string& name, const CliOptions& options) {
  try {
    if (name == "select-actions") {
      cmd_select_actions(options);
    } else if (name == "train") {
      cmd_train(options);
    } else if (name == "eval") {
      cmd_eval(options);
    } else if (name == "sweep") {
      cmd_sweep(options);
    } else {
      std::cerr << "unknown command: " << name << "\n";
      return 1;
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const TrainingDivergedError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace declab::harness
