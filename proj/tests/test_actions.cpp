#include <doctest.h>

#include <cmath>
#include <sstream>

#include "declab/actions.hpp"
#include "declab/env.hpp"
#include "declab/errors.hpp"
#include "oracles.hpp"

using namespace declab;
using actions::RewardMatrix;
using categorical::DecodingAction;

namespace {

RewardMatrix matrix_from(const std::vector<std::vector<double>>& rows) {
  const int n = static_cast<int>(rows.size());
  const int m = static_cast<int>(rows.front().size());
  std::vector<std::string> instance_ids, strategy_ids;
  for (int i = 0; i < n; ++i) instance_ids.push_back("i" + std::to_string(i));
  for (int s = 0; s < m; ++s) strategy_ids.push_back("s" + std::to_string(s));
  RewardMatrix matrix(n, m, instance_ids, strategy_ids);
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < m; ++s) matrix.set(i, s, rows[static_cast<size_t>(i)][static_cast<size_t>(s)]);
  }
  return matrix;
}

std::vector<std::vector<double>> random_binary_rows(declab::rng::Stream& stream,
                                                    int n, int m,
                                                    double density = 0.4) {
  std::vector<std::vector<double>> rows(static_cast<size_t>(n),
                                        std::vector<double>(static_cast<size_t>(m)));
  for (auto& row : rows) {
    for (double& v : row) v = stream.next_double() < density ? 1.0 : 0.0;
  }
  return rows;
}

}  // namespace

TEST_SUITE_BEGIN("actions");

TEST_CASE("default sweep builds the full 180-strategy pool") {
  auto pool = actions::build_candidate_pool(actions::GridSpec::default_sweep());
  CHECK(pool.size() == 180);  // 5 temperatures x 4 top-k x 3 top-p x 3 min-p
  // no duplicates is enforced by the constructor; spot-check the ordering:
  // temperature outermost, min-p innermost, "off" last in each range.
  CHECK(pool[0].key() == "T=0.3,top_k=5,top_p=0.9,min_p=0.1");
  CHECK(pool[1].key() == "T=0.3,top_k=5,top_p=0.9,min_p=0.2");
  CHECK(pool[2].key() == "T=0.3,top_k=5,top_p=0.9");
  CHECK(pool[179].key() == "T=1.25");
}

TEST_CASE("singleton and two-temperature grids") {
  actions::GridSpec grid;
  grid.temperatures = {1.0};
  grid.top_ks = {std::nullopt};
  grid.top_ps = {std::nullopt};
  grid.min_ps = {std::nullopt};
  CHECK(actions::build_candidate_pool(grid).size() == 1);

  grid.temperatures = {0.5, 1.0};
  auto pool = actions::build_candidate_pool(grid);
  REQUIRE(pool.size() == 2);
  CHECK(pool[0].temperature == 0.5);
  CHECK(pool[1].temperature == 1.0);
  CHECK_FALSE(pool[0].top_k.has_value());

  grid.temperatures = {};
  CHECK_THROWS_AS(actions::build_candidate_pool(grid), ConfigError);
}

TEST_CASE("coverage_value basics") {
  auto matrix = matrix_from({{1, 0}, {0, 1}});
  std::vector<int> both = {0, 1};
  std::vector<int> first = {0};
  CHECK(actions::coverage_value(both, matrix) == 2.0);
  CHECK(actions::coverage_value(first, matrix) == 1.0);
  CHECK(actions::coverage_value_normalized(both, matrix) == 1.0);
  std::vector<int> empty;
  CHECK_THROWS_AS(actions::coverage_value(empty, matrix), std::invalid_argument);

  // singleton coverage is N * Q(s)
  auto random = matrix_from({{0.2, 0.9}, {0.4, 0.1}, {0.6, 0.5}});
  for (int s = 0; s < 2; ++s) {
    std::vector<int> single = {s};
    CHECK(actions::coverage_value(single, random) ==
          doctest::Approx(3.0 * random.column_mean(s)).epsilon(1e-12));
  }
}

TEST_CASE("greedy_select on the hand-enumerated example") {
  auto matrix = matrix_from({{1, 0}, {0, 1}, {1, 1}});
  auto k1 = actions::greedy_select_indices(matrix, 1);
  // both columns sum to 2: the tie goes to the lowest index
  CHECK(k1.indices == std::vector<int>{0});
  auto k2 = actions::greedy_select_indices(matrix, 2);
  CHECK(k2.indices == std::vector<int>{0, 1});
  CHECK(k2.coverage_trace.back() == 3.0);
  CHECK_THROWS_AS(actions::greedy_select_indices(matrix, 3), ConfigError);
}

TEST_CASE("k = M reaches full-pool coverage") {
  auto stream = declab::rng::Root(5).stream("kM");
  auto rows = random_binary_rows(stream, 6, 4);
  auto matrix = matrix_from(rows);
  auto all = actions::greedy_select_indices(matrix, 4);
  std::vector<int> full = {0, 1, 2, 3};
  CHECK(all.coverage_trace.back() ==
        doctest::Approx(actions::coverage_value(full, matrix)).epsilon(1e-12));
}

TEST_CASE("greedy achieves the (1 - 1/e) bound against the exhaustive optimum") {
  auto stream = declab::rng::Root(17).stream("bound");
  for (int trial = 0; trial < 25; ++trial) {
    auto rows = random_binary_rows(stream, 8, 10);
    auto matrix = matrix_from(rows);
    auto greedy = actions::greedy_select_indices(matrix, 3);
    const double best = oracles::exhaustive_best_coverage(rows, 3);
    CHECK(greedy.coverage_trace.back() >= (1.0 - 1.0 / std::exp(1.0)) * best - 1e-12);
  }
}

TEST_CASE("topk_by_mean: first pick, counterexample, exhaustive k") {
  auto stream = declab::rng::Root(23).stream("means");
  for (int trial = 0; trial < 20; ++trial) {
    auto matrix = matrix_from(random_binary_rows(stream, 7, 6));
    auto greedy = actions::greedy_select_indices(matrix, 1);
    auto topk = actions::topk_by_mean_indices(matrix, 1);
    CHECK(greedy.indices == topk.indices);
  }

  // complementary strategies beat redundant high-mean ones
  auto matrix = matrix_from({{1, 1, 0}, {1, 1, 0}, {0, 0, 1}});
  auto by_mean = actions::topk_by_mean_indices(matrix, 2);
  CHECK(by_mean.indices == std::vector<int>{0, 1});
  CHECK(by_mean.coverage_trace.back() == 2.0);
  auto greedy = actions::greedy_select_indices(matrix, 2);
  CHECK(greedy.indices == std::vector<int>{0, 2});
  CHECK(greedy.coverage_trace.back() == 3.0);

  auto all = actions::topk_by_mean_indices(matrix, 3);
  CHECK(all.indices.size() == 3);
}

TEST_CASE("property: coverage is monotone and submodular; traces nondecreasing") {
  auto stream = declab::rng::Root(29).stream("submodular");
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(stream.next_below(6));
    const int m = 2 + static_cast<int>(stream.next_below(6));
    std::vector<std::vector<double>> rows(static_cast<size_t>(n),
                                          std::vector<double>(static_cast<size_t>(m)));
    for (auto& row : rows) {
      for (double& v : row) v = stream.next_double();
    }
    auto matrix = matrix_from(rows);

    // monotone: S subset of S' implies F(S) <= F(S')
    std::vector<int> small, large;
    for (int s = 0; s < m; ++s) {
      if (stream.next_double() < 0.5) small.push_back(s);
      large.push_back(s);
    }
    if (!small.empty()) {
      CHECK(actions::coverage_value(small, matrix) <=
            actions::coverage_value(large, matrix) + 1e-12);
    }

    // submodular: gain of adding x to S >= gain of adding x to a superset
    const int x = static_cast<int>(stream.next_below(static_cast<std::uint64_t>(m)));
    std::vector<int> base_set, super_set;
    for (int s = 0; s < m; ++s) {
      if (s == x) continue;
      const double u = stream.next_double();
      if (u < 0.3) base_set.push_back(s);
      if (u < 0.6) super_set.push_back(s);
    }
    if (!base_set.empty()) {
      for (int s : base_set) {
        if (std::find(super_set.begin(), super_set.end(), s) == super_set.end()) {
          super_set.push_back(s);
        }
      }
      auto with = [&](std::vector<int> set) {
        set.push_back(x);
        return actions::coverage_value(set, matrix);
      };
      const double gain_small = with(base_set) - actions::coverage_value(base_set, matrix);
      const double gain_large = with(super_set) - actions::coverage_value(super_set, matrix);
      CHECK(gain_small >= gain_large - 1e-12);
    }

    const int k = 1 + static_cast<int>(stream.next_below(static_cast<std::uint64_t>(m)));
    auto selection = actions::greedy_select_indices(matrix, k);
    for (size_t i = 1; i < selection.coverage_trace.size(); ++i) {
      CHECK(selection.coverage_trace[i] >= selection.coverage_trace[i - 1] - 1e-12);
    }
  }
}

TEST_CASE("property: greedy coverage >= top-k-by-mean coverage on random matrices") {
  auto stream = declab::rng::Root(31).stream("greedy-vs-mean");
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(stream.next_below(10));
    const int m = 2 + static_cast<int>(stream.next_below(8));
    auto matrix = matrix_from(random_binary_rows(stream, n, m, 0.35));
    const int k = 1 + static_cast<int>(stream.next_below(
                          static_cast<std::uint64_t>(std::min(m, 4))));
    auto greedy = actions::greedy_select_indices(matrix, k);
    auto by_mean = actions::topk_by_mean_indices(matrix, k);
    CHECK(greedy.coverage_trace.back() >= by_mean.coverage_trace.back() - 1e-12);
  }
}

TEST_CASE("estimate_reward_matrix: constant env, greedy on ForkingChain, determinism") {
  // deterministic-success environment: one archetype whose argmax is correct
  env::TwoRegimeSpec spec;
  spec.class_mix = 1.0;
  spec.classes[0] = {{1.0, {0.7, 0.3}, {0}}};
  spec.classes[1] = {{1.0, {0.7, 0.3}, {0}}};
  env::TwoRegime certain(spec);
  actions::CandidatePool greedy_pool({DecodingAction::make_greedy()});
  declab::rng::Root root(77);
  auto ones = actions::estimate_reward_matrix(certain, greedy_pool, 5, 3, root);
  for (int i = 0; i < ones.num_instances(); ++i) {
    CHECK(ones.at(i, 0) == 1.0);
  }

  env::ForkingChain chain{env::ForkingChainSpec{}};
  auto zeros = actions::estimate_reward_matrix(chain, greedy_pool, 4, 2, root);
  for (int i = 0; i < zeros.num_instances(); ++i) {
    CHECK(zeros.at(i, 0) == 0.0);  // the argmax at a fork is the dead end
  }

  actions::GridSpec small;
  small.temperatures = {0.5, 1.0};
  small.top_ks = {std::nullopt};
  small.top_ps = {std::nullopt};
  small.min_ps = {std::nullopt};
  auto pool = actions::build_candidate_pool(small);
  auto a = actions::estimate_reward_matrix(chain, pool, 6, 3, root);
  auto b = actions::estimate_reward_matrix(chain, pool, 6, 3, root);
  for (int i = 0; i < a.num_instances(); ++i) {
    for (int s = 0; s < a.num_strategies(); ++s) {
      CHECK(a.at(i, s) == b.at(i, s));
    }
  }
}

TEST_CASE("reward matrix csv round-trips") {
  auto matrix = matrix_from({{0.25, 1.0 / 3.0}, {0.0, 1.0}});
  std::stringstream buffer;
  matrix.to_csv(buffer);
  auto parsed = RewardMatrix::from_csv(buffer);
  REQUIRE(parsed.num_instances() == 2);
  REQUIRE(parsed.num_strategies() == 2);
  for (int i = 0; i < 2; ++i) {
    for (int s = 0; s < 2; ++s) CHECK(parsed.at(i, s) == matrix.at(i, s));
  }
  CHECK(parsed.strategy_ids() == matrix.strategy_ids());
}

TEST_CASE("action json round-trip and strictness") {
  auto action = DecodingAction::sampling(1.25, 10, std::nullopt, 0.1);
  auto back = actions::action_from_json_text(actions::action_to_json(action));
  CHECK(back == action);
  CHECK_THROWS_AS(actions::action_from_json_text("{\"temp\": 1.0}"), ConfigError);
  auto greedy = actions::action_from_json_text("{\"greedy\": true}");
  CHECK(greedy.greedy);

  actions::ActionSet set;
  set.actions = {DecodingAction::make_greedy(), action};
  set.coverage_trace = {1.0, 2.0};
  auto decoded = actions::action_set_from_json(actions::action_set_to_json(set, 4));
  REQUIRE(decoded.actions.size() == 2);
  CHECK(decoded.actions[1] == action);
  CHECK(decoded.coverage_trace == set.coverage_trace);
}

TEST_SUITE_END();
