#pragma once

/**
 * Candidate decoding-strategy pool and data-driven action-set selection.
 *
 * The pool is a Cartesian sweep over temperature / top-k / top-p / min-p
 * values ("off" sentinels map to unset fields). Selection maximizes the
 * coverage objective
 *
 *     F(S) = sum over instances of max over s in S of R(x, s),
 *
 * which is monotone submodular, so greedy selection carries the usual
 * (1 - 1/e) guarantee. A mean-top-K baseline is provided for comparison.
 */

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "declab/categorical.hpp"
#include "declab/env.hpp"
#include "declab/rng.hpp"

namespace declab::actions {

struct GridSpec {
  std::vector<double> temperatures;
  /// nullopt entries mean "filter off".
  std::vector<std::optional<int>> top_ks;
  std::vector<std::optional<double>> top_ps;
  std::vector<std::optional<double>> min_ps;

  /// The 180-strategy sweep: 5 temperatures x 4 top-k x 3 top-p x 3 min-p.
  static GridSpec default_sweep();
  void validate() const;
};

class CandidatePool {
 public:
  explicit CandidatePool(std::vector<categorical::DecodingAction> strategies);

  const std::vector<categorical::DecodingAction>& strategies() const {
    return strategies_;
  }
  int size() const { return static_cast<int>(strategies_.size()); }
  const categorical::DecodingAction& operator[](int i) const {
    return strategies_[static_cast<size_t>(i)];
  }

 private:
  std::vector<categorical::DecodingAction> strategies_;
};

/// Cartesian product of the grid in lexicographic order (temperature
/// outermost, min-p innermost). Throws ConfigError on an empty range.
CandidatePool build_candidate_pool(const GridSpec& grid);

/// N instances x M strategies of terminal reward in [0, 1].
class RewardMatrix {
 public:
  RewardMatrix(int num_instances, int num_strategies,
               std::vector<std::string> instance_ids,
               std::vector<std::string> strategy_ids);

  int num_instances() const { return n_; }
  int num_strategies() const { return m_; }
  double at(int instance, int strategy) const {
    return values_[static_cast<size_t>(instance) * m_ + strategy];
  }
  void set(int instance, int strategy, double reward);

  const std::vector<std::string>& instance_ids() const { return instance_ids_; }
  const std::vector<std::string>& strategy_ids() const { return strategy_ids_; }

  /// Column mean Q(s): average reward of one strategy across instances.
  double column_mean(int strategy) const;

  /// Header row of strategy ids, one row per instance. Lines starting with
  /// '#' are ignored on load.
  void to_csv(std::ostream& out) const;
  static RewardMatrix from_csv(std::istream& in);

 private:
  int n_, m_;
  std::vector<double> values_;
  std::vector<std::string> instance_ids_, strategy_ids_;
};

/// Selected strategy indices plus F(S) after each addition.
struct Selection {
  std::vector<int> indices;
  std::vector<double> coverage_trace;
};

/// Ordered selected actions with the greedy coverage trace.
struct ActionSet {
  std::vector<categorical::DecodingAction> actions;
  std::vector<double> coverage_trace;
};

/// F(S) = sum over instances of the best reward within S. Throws on an
/// empty or out-of-range subset.
double coverage_value(std::span<const int> subset, const RewardMatrix& rewards);

/// Same, divided by the number of instances.
double coverage_value_normalized(std::span<const int> subset,
                                 const RewardMatrix& rewards);

/// Greedy coverage maximization; ties in marginal gain resolve to the
/// lowest strategy index. Requires 1 <= k <= M.
Selection greedy_select_indices(const RewardMatrix& rewards, int k);

/// Baseline: the k strategies with the highest column mean Q(s), lowest
/// index on ties; coverage_trace records F after each addition in that order.
Selection topk_by_mean_indices(const RewardMatrix& rewards, int k);

ActionSet greedy_select(const RewardMatrix& rewards, const CandidatePool& pool,
                        int k);
ActionSet topk_by_mean_select(const RewardMatrix& rewards,
                              const CandidatePool& pool, int k);

/**
 * Monte Carlo estimate of R: for each of `num_instances` validation
 * instances and each pool strategy, the mean terminal reward over
 * `samples_per_cell` rollouts. Cells own independent substreams keyed by
 * (instance id, strategy id), so the result is reproducible and may be
 * filled in parallel.
 */
RewardMatrix estimate_reward_matrix(const env::Environment& environment,
                                    const CandidatePool& pool,
                                    int num_instances, int samples_per_cell,
                                    const rng::Root& root,
                                    std::uint64_t instance_id_base = 0,
                                    int workers = 1);

/// JSON document {"actions": [...], "coverage_trace": [...],
/// "coverage_trace_normalized": [...]}.
std::string action_set_to_json(const ActionSet& set, int num_instances);
ActionSet action_set_from_json(const std::string& text);

std::string action_to_json(const categorical::DecodingAction& action);
categorical::DecodingAction action_from_json_text(const std::string& text);

}  // namespace declab::actions
