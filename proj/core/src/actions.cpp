#include "declab/actions.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "declab/errors.hpp"
#include "declab/parallel.hpp"

namespace declab::actions {

namespace {

using categorical::DecodingAction;
using nlohmann::json;

void format_double(std::ostream& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, ptr - buf);
  (void)ec;
}

json action_to_json_obj(const DecodingAction& a) {
  json j = json::object();
  if (a.greedy) {
    j["greedy"] = true;
    return j;
  }
  j["temperature"] = *a.temperature;
  if (a.top_k) j["top_k"] = *a.top_k;
  if (a.top_p) j["top_p"] = *a.top_p;
  if (a.min_p) j["min_p"] = *a.min_p;
  return j;
}

DecodingAction action_from_json_obj(const json& j) {
  static const std::vector<std::string> known = {"greedy", "temperature",
                                                 "top_k", "top_p", "min_p"};
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw ConfigError("unknown key in action: " + item.key());
    }
  }
  DecodingAction a;
  if (j.value("greedy", false)) {
    a = DecodingAction::make_greedy();
    if (j.contains("temperature") || j.contains("top_k") ||
        j.contains("top_p") || j.contains("min_p")) {
      throw ConfigError("greedy action must not set sampling parameters");
    }
    return a;
  }
  if (!j.contains("temperature")) {
    throw ConfigError("sampling action requires a temperature");
  }
  a.temperature = j.at("temperature").get<double>();
  if (j.contains("top_k")) a.top_k = j.at("top_k").get<int>();
  if (j.contains("top_p")) a.top_p = j.at("top_p").get<double>();
  if (j.contains("min_p")) a.min_p = j.at("min_p").get<double>();
  a.validate();
  return a;
}

}  // namespace

GridSpec GridSpec::default_sweep() {
  GridSpec grid;
  grid.temperatures = {0.3, 0.5, 0.75, 1.0, 1.25};
  grid.top_ks = {5, 10, 50, std::nullopt};
  grid.top_ps = {0.9, 0.95, std::nullopt};
  grid.min_ps = {0.1, 0.2, std::nullopt};
  return grid;
}

void GridSpec::validate() const {
  if (temperatures.empty() || top_ks.empty() || top_ps.empty() ||
      min_ps.empty()) {
    throw ConfigError("candidate grid has an empty parameter range");
  }
  for (double t : temperatures) {
    if (!(t > 0.0)) throw ConfigError("grid temperatures must be positive");
  }
}

CandidatePool::CandidatePool(std::vector<DecodingAction> strategies)
    : strategies_(std::move(strategies)) {
  if (strategies_.empty()) {
    throw ConfigError("candidate pool must be non-empty");
  }
  for (size_t i = 0; i < strategies_.size(); ++i) {
    strategies_[i].validate();
    for (size_t j = i + 1; j < strategies_.size(); ++j) {
      if (strategies_[i] == strategies_[j]) {
        throw ConfigError("duplicate strategy in candidate pool: " +
                          strategies_[i].key());
      }
    }
  }
}

CandidatePool build_candidate_pool(const GridSpec& grid) {
  grid.validate();
  std::vector<DecodingAction> strategies;
  strategies.reserve(grid.temperatures.size() * grid.top_ks.size() *
                     grid.top_ps.size() * grid.min_ps.size());
  for (double t : grid.temperatures) {
    for (const auto& k : grid.top_ks) {
      for (const auto& p : grid.top_ps) {
        for (const auto& m : grid.min_ps) {
          strategies.push_back(DecodingAction::sampling(t, k, p, m));
        }
      }
    }
  }
  return CandidatePool(std::move(strategies));
}

RewardMatrix::RewardMatrix(int num_instances, int num_strategies,
                           std::vector<std::string> instance_ids,
                           std::vector<std::string> strategy_ids)
    : n_(num_instances),
      m_(num_strategies),
      values_(static_cast<size_t>(num_instances) * num_strategies, 0.0),
      instance_ids_(std::move(instance_ids)),
      strategy_ids_(std::move(strategy_ids)) {
  if (n_ < 1 || m_ < 1) {
    throw std::invalid_argument("RewardMatrix needs N >= 1 and M >= 1");
  }
  if (static_cast<int>(instance_ids_.size()) != n_ ||
      static_cast<int>(strategy_ids_.size()) != m_) {
    throw std::invalid_argument("RewardMatrix id lists do not match shape");
  }
}

void RewardMatrix::set(int instance, int strategy, double reward) {
  if (!(reward >= 0.0 && reward <= 1.0)) {
    throw std::invalid_argument("rewards must lie in [0, 1]");
  }
  values_[static_cast<size_t>(instance) * m_ + strategy] = reward;
}

double RewardMatrix::column_mean(int strategy) const {
  double sum = 0.0;
  for (int i = 0; i < n_; ++i) sum += at(i, strategy);
  return sum / n_;
}

void RewardMatrix::to_csv(std::ostream& out) const {
  out << "instance";
  for (const auto& id : strategy_ids_) out << ',' << id;
  out << '\n';
  for (int i = 0; i < n_; ++i) {
    out << instance_ids_[static_cast<size_t>(i)];
    for (int s = 0; s < m_; ++s) {
      out << ',';
      format_double(out, at(i, s));
    }
    out << '\n';
  }
}

RewardMatrix RewardMatrix::from_csv(std::istream& in) {
  std::string line;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      if (!line.empty() && line[0] != '#') return true;
    }
    return false;
  };
  if (!next_line()) throw std::runtime_error("reward matrix csv is empty");

  auto split = [](const std::string& text) {
    std::vector<std::string> cells;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };

  auto header = split(line);
  if (header.size() < 2 || header[0] != "instance") {
    throw std::runtime_error("reward matrix csv has a malformed header");
  }
  std::vector<std::string> strategy_ids(header.begin() + 1, header.end());
  std::vector<std::string> instance_ids;
  std::vector<std::vector<double>> rows;
  while (next_line()) {
    auto cells = split(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("reward matrix csv row width mismatch");
    }
    instance_ids.push_back(cells[0]);
    std::vector<double> row;
    for (size_t i = 1; i < cells.size(); ++i) row.push_back(std::stod(cells[i]));
    rows.push_back(std::move(row));
  }
  const int n = static_cast<int>(rows.size());
  const int m = static_cast<int>(strategy_ids.size());
  RewardMatrix matrix(n, m, std::move(instance_ids), std::move(strategy_ids));
  for (int i = 0; i < matrix.num_instances(); ++i) {
    for (int s = 0; s < matrix.num_strategies(); ++s) {
      matrix.set(i, s, rows[static_cast<size_t>(i)][static_cast<size_t>(s)]);
    }
  }
  return matrix;
}

double coverage_value(std::span<const int> subset, const RewardMatrix& rewards) {
  if (subset.empty()) {
    throw std::invalid_argument("coverage_value needs a non-empty subset");
  }
  for (int s : subset) {
    if (s < 0 || s >= rewards.num_strategies()) {
      throw std::invalid_argument("coverage_value: strategy index out of range");
    }
  }
  double total = 0.0;
  for (int i = 0; i < rewards.num_instances(); ++i) {
    double best = 0.0;
    for (int s : subset) best = std::max(best, rewards.at(i, s));
    total += best;
  }
  return total;
}

double coverage_value_normalized(std::span<const int> subset,
                                 const RewardMatrix& rewards) {
  return coverage_value(subset, rewards) / rewards.num_instances();
}

Selection greedy_select_indices(const RewardMatrix& rewards, int k) {
  const int m = rewards.num_strategies();
  if (k < 1 || k > m) {
    throw ConfigError("greedy_select: k must be in [1, M]");
  }
  const int n = rewards.num_instances();
  Selection selection;
  std::vector<bool> chosen(static_cast<size_t>(m), false);
  // best reward per instance achieved by the current set
  std::vector<double> covered(static_cast<size_t>(n), 0.0);
  double current = 0.0;
  for (int round = 0; round < k; ++round) {
    int best_strategy = -1;
    double best_gain = -1.0;
    for (int s = 0; s < m; ++s) {
      if (chosen[static_cast<size_t>(s)]) continue;
      double gain = 0.0;
      for (int i = 0; i < n; ++i) {
        const double r = rewards.at(i, s);
        if (r > covered[static_cast<size_t>(i)]) {
          gain += r - covered[static_cast<size_t>(i)];
        }
      }
      if (gain > best_gain) {  // strict: lowest index wins ties
        best_gain = gain;
        best_strategy = s;
      }
    }
    chosen[static_cast<size_t>(best_strategy)] = true;
    for (int i = 0; i < n; ++i) {
      covered[static_cast<size_t>(i)] =
          std::max(covered[static_cast<size_t>(i)],
                   rewards.at(i, best_strategy));
    }
    current += best_gain;
    selection.indices.push_back(best_strategy);
    selection.coverage_trace.push_back(current);
  }
  return selection;
}

Selection topk_by_mean_indices(const RewardMatrix& rewards, int k) {
  const int m = rewards.num_strategies();
  if (k < 1 || k > m) {
    throw ConfigError("topk_by_mean_select: k must be in [1, M]");
  }
  std::vector<int> order(static_cast<size_t>(m));
  for (int s = 0; s < m; ++s) order[static_cast<size_t>(s)] = s;
  std::vector<double> means(static_cast<size_t>(m));
  for (int s = 0; s < m; ++s) means[static_cast<size_t>(s)] = rewards.column_mean(s);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (means[static_cast<size_t>(a)] != means[static_cast<size_t>(b)]) {
      return means[static_cast<size_t>(a)] > means[static_cast<size_t>(b)];
    }
    return a < b;
  });
  Selection selection;
  for (int r = 0; r < k; ++r) {
    selection.indices.push_back(order[static_cast<size_t>(r)]);
    selection.coverage_trace.push_back(
        coverage_value(selection.indices, rewards));
  }
  return selection;
}

namespace {

ActionSet to_action_set(const Selection& selection, const RewardMatrix& rewards,
                        const CandidatePool& pool) {
  if (pool.size() != rewards.num_strategies()) {
    throw ConfigError("pool size does not match reward matrix");
  }
  ActionSet set;
  for (int idx : selection.indices) set.actions.push_back(pool[idx]);
  set.coverage_trace = selection.coverage_trace;
  return set;
}

}  // namespace

ActionSet greedy_select(const RewardMatrix& rewards, const CandidatePool& pool,
                        int k) {
  return to_action_set(greedy_select_indices(rewards, k), rewards, pool);
}

ActionSet topk_by_mean_select(const RewardMatrix& rewards,
                              const CandidatePool& pool, int k) {
  return to_action_set(topk_by_mean_indices(rewards, k), rewards, pool);
}

RewardMatrix estimate_reward_matrix(const env::Environment& environment,
                                    const CandidatePool& pool,
                                    int num_instances, int samples_per_cell,
                                    const rng::Root& root,
                                    std::uint64_t instance_id_base,
                                    int workers) {
  if (num_instances < 1) {
    throw ConfigError("estimate_reward_matrix needs num_instances >= 1");
  }
  if (samples_per_cell < 1) {
    throw ConfigError("estimate_reward_matrix needs samples_per_cell >= 1");
  }
  std::vector<std::string> instance_ids;
  for (int i = 0; i < num_instances; ++i) {
    instance_ids.push_back(std::to_string(instance_id_base + i));
  }
  std::vector<std::string> strategy_ids;
  for (const auto& s : pool.strategies()) strategy_ids.push_back(s.key());
  RewardMatrix matrix(num_instances, pool.size(), std::move(instance_ids),
                      std::move(strategy_ids));

  const int cells = num_instances * pool.size();
  std::vector<double> flat(static_cast<size_t>(cells), 0.0);
  parallel_for(cells, workers, [&](int cell) {
    const int i = cell / pool.size();
    const int s = cell % pool.size();
    const auto instance =
        environment.make_instance(instance_id_base + static_cast<std::uint64_t>(i));
    double total = 0.0;
    for (int r = 0; r < samples_per_cell; ++r) {
      auto stream = root.stream("reward-matrix", instance.id,
                                static_cast<std::uint64_t>(s),
                                static_cast<std::uint64_t>(r));
      total += environment.static_rollout(instance, pool[s], stream);
    }
    flat[static_cast<size_t>(cell)] = total / samples_per_cell;
  });
  for (int cell = 0; cell < cells; ++cell) {
    matrix.set(cell / pool.size(), cell % pool.size(),
               flat[static_cast<size_t>(cell)]);
  }
  return matrix;
}

std::string action_to_json(const DecodingAction& action) {
  return action_to_json_obj(action).dump();
}

categorical::DecodingAction action_from_json_text(const std::string& text) {
  return action_from_json_obj(json::parse(text));
}

std::string action_set_to_json(const ActionSet& set, int num_instances) {
  json j;
  j["actions"] = json::array();
  for (const auto& a : set.actions) j["actions"].push_back(action_to_json_obj(a));
  j["coverage_trace"] = set.coverage_trace;
  std::vector<double> normalized;
  for (double v : set.coverage_trace) {
    normalized.push_back(num_instances > 0 ? v / num_instances : v);
  }
  j["coverage_trace_normalized"] = normalized;
  return j.dump(2);
}

ActionSet action_set_from_json(const std::string& text) {
  json j = json::parse(text);
  ActionSet set;
  for (const auto& a : j.at("actions")) {
    set.actions.push_back(action_from_json_obj(a));
  }
  if (j.contains("coverage_trace")) {
    set.coverage_trace = j.at("coverage_trace").get<std::vector<double>>();
  }
  return set;
}

}  // namespace declab::actions
