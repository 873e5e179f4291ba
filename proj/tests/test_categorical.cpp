#include <doctest.h>

#include <cmath>
#include <vector>

#include "declab/categorical.hpp"
#include "declab/rng.hpp"
#include "oracles.hpp"

using namespace declab::categorical;
using declab::rng::Root;

namespace {

constexpr double kTight = 1e-12;

CategoricalDist dist_of(std::vector<double> probs) {
  return CategoricalDist(std::move(probs));
}

void check_close(const std::vector<double>& got, const std::vector<double>& want,
                 double tol = kTight) {
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < got.size(); ++i) {
    CHECK(std::abs(got[i] - want[i]) <=
          tol * std::max(1.0, std::abs(want[i])));
  }
}

std::vector<double> random_probs(declab::rng::Stream& stream, int size) {
  std::vector<double> p(static_cast<size_t>(size));
  double sum = 0.0;
  for (double& v : p) {
    v = -std::log(1.0 - stream.next_double() + 1e-12);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("categorical");

TEST_CASE("softmax: symmetry, shift invariance, reference values") {
  check_close(softmax(Logits({0.0, 0.0, 0.0})).probs(),
              {1.0 / 3, 1.0 / 3, 1.0 / 3});
  for (double c : {-100.0, -1.0, 0.0, 3.5, 250.0}) {
    check_close(softmax(Logits({c, c + std::log(2.0)})).probs(),
                {1.0 / 3, 2.0 / 3}, 1e-15);
  }
  // frozen from a 50-digit evaluation of e^k / (e^1 + e^2 + e^3)
  check_close(softmax(Logits({1.0, 2.0, 3.0})).probs(),
              {0.09003057317038046, 0.24472847105479764, 0.6652409557748219},
              1e-15);
  auto reference = softmax(Logits({1.0, 2.0, 3.0}));
  double total = 0.0;
  for (double p : reference.probs()) total += p;
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("softmax rejects non-finite input") {
  CHECK_THROWS_AS(softmax(Logits({1.0, std::nan("")})), std::invalid_argument);
  CHECK_THROWS_AS(softmax(Logits({1.0, INFINITY})), std::invalid_argument);
  CHECK_THROWS_AS(softmax(Logits(std::vector<double>{})), std::invalid_argument);
}

TEST_CASE("apply_temperature scales logits") {
  check_close(apply_temperature(Logits({1, 2, 3}), 1.0).values, {1, 2, 3}, 0.0);
  check_close(apply_temperature(Logits({2, 4}), 2.0).values, {1, 2}, 0.0);
  CHECK_THROWS_AS(apply_temperature(Logits({1.0}), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(apply_temperature(Logits({1.0}), -1.0), std::invalid_argument);
}

TEST_CASE("temperature below one sharpens and preserves the argmax") {
  auto base = softmax(Logits({1, 2, 3}));
  auto sharp = softmax(apply_temperature(Logits({1, 2, 3}), 0.5));
  CHECK(argmax(sharp) == argmax(base));
  CHECK(sharp[2] > base[2]);
  CHECK(entropy(sharp) < entropy(base));
}

TEST_CASE("top_k_filter: identity, truncation, tie-break") {
  auto d = dist_of({0.5, 0.3, 0.2});
  check_close(top_k_filter(d, 3).probs(), {0.5, 0.3, 0.2}, 0.0);
  check_close(top_k_filter(d, 7).probs(), {0.5, 0.3, 0.2}, 0.0);
  check_close(top_k_filter(d, 2).probs(), {0.625, 0.375, 0.0});
  // equal probabilities: the two lowest indices survive
  check_close(top_k_filter(dist_of({0.25, 0.25, 0.25, 0.25}), 2).probs(),
              {0.5, 0.5, 0.0, 0.0});
  CHECK_THROWS_AS(top_k_filter(d, 0), std::invalid_argument);
}

TEST_CASE("top_p_filter: identity and cumulative-mass truncation") {
  auto d = dist_of({0.5, 0.3, 0.2});
  check_close(top_p_filter(d, 1.0).probs(), {0.5, 0.3, 0.2}, 0.0);
  check_close(top_p_filter(d, 0.8).probs(), {0.625, 0.375, 0.0});
  // cumulative 0.8 < 0.9 forces the third entry in
  check_close(top_p_filter(d, 0.9).probs(), {0.5, 0.3, 0.2});
  CHECK_THROWS_AS(top_p_filter(d, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(top_p_filter(d, 1.5), std::invalid_argument);
}

TEST_CASE("min_p_filter: identity, threshold, all-equal") {
  auto d = dist_of({0.6, 0.25, 0.1, 0.05});
  check_close(min_p_filter(d, 0.0).probs(), {0.6, 0.25, 0.1, 0.05}, 0.0);
  // threshold 0.12 keeps the first two
  check_close(min_p_filter(d, 0.2).probs(),
              {12.0 / 17.0, 5.0 / 17.0, 0.0, 0.0});
  auto uniform = dist_of({0.25, 0.25, 0.25, 0.25});
  check_close(min_p_filter(uniform, 0.9).probs(), {0.25, 0.25, 0.25, 0.25}, 0.0);
  CHECK_THROWS_AS(min_p_filter(d, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(min_p_filter(d, -0.1), std::invalid_argument);
}

TEST_CASE("apply_action: greedy is a point mass on the argmax") {
  auto greedy = DecodingAction::make_greedy();
  auto d = apply_action(Logits({0.3, 2.0, -1.0, 2.0}), greedy);
  CHECK(d[1] == 1.0);  // lowest index among the maxima
  CHECK(entropy(d) == 0.0);
}

TEST_CASE("apply_action: plain temperature equals softmax") {
  auto action = DecodingAction::sampling(1.0);
  check_close(apply_action(Logits({1, 2, 3}), action).probs(),
              softmax(Logits({1, 2, 3})).probs(), 0.0);
}

TEST_CASE("apply_action composition matches composed reference oracles") {
  auto action = DecodingAction::sampling(0.5, 2, 0.95, 0.1);
  std::vector<double> logits = {1.0, 2.0, 3.0};
  check_close(apply_action(Logits(logits), action).probs(),
              oracles::ref_apply_action(logits, action));
}

TEST_CASE("decoding action validation and keys") {
  auto greedy = DecodingAction::make_greedy();
  CHECK(greedy.key() == "greedy");
  auto full = DecodingAction::sampling(1.25, 10, 0.9, 0.1);
  CHECK(full.key() == "T=1.25,top_k=10,top_p=0.9,min_p=0.1");
  DecodingAction bad;
  bad.greedy = true;
  bad.temperature = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  DecodingAction no_temp;
  CHECK_THROWS_AS(no_temp.validate(), std::invalid_argument);
  CHECK_THROWS_AS(DecodingAction::sampling(1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(DecodingAction::sampling(1.0, std::nullopt, 1.5),
                  std::invalid_argument);
}

TEST_CASE("entropy: point mass, uniform, zero entries") {
  CHECK(entropy(CategoricalDist::point_mass(0, 5)) == 0.0);
  for (int m : {2, 3, 7, 16}) {
    std::vector<double> u(static_cast<size_t>(m), 1.0 / m);
    CHECK(std::abs(entropy(dist_of(u)) - std::log(static_cast<double>(m))) <
          1e-12);
  }
  CHECK(std::abs(entropy(dist_of({0.5, 0.5, 0.0})) - std::log(2.0)) < 1e-12);
}

TEST_CASE("sample: point mass, determinism, frequencies") {
  Root root(123);
  auto point = CategoricalDist::point_mass(2, 4);
  auto stream = root.stream("sample-point");
  for (int i = 0; i < 50; ++i) CHECK(sample(point, stream) == 2);

  // identical stream state => identical draw
  auto d = dist_of({0.1, 0.2, 0.3, 0.4});
  auto s1 = root.stream("sample-det");
  auto s2 = root.stream("sample-det");
  for (int i = 0; i < 50; ++i) CHECK(sample(d, s1) == sample(d, s2));

  // uniform over four outcomes: each frequency within 4 sigma of 0.25
  auto uniform = dist_of({0.25, 0.25, 0.25, 0.25});
  auto s3 = root.stream("sample-freq");
  const int n = 100000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) ++counts[static_cast<size_t>(sample(uniform, s3))];
  const double sigma = std::sqrt(0.25 * 0.75 / n);
  for (int c : counts) {
    CHECK(std::abs(static_cast<double>(c) / n - 0.25) < 4.0 * sigma);
  }
}

TEST_CASE("distribution invariants are enforced") {
  CHECK_THROWS_AS(dist_of({0.5, 0.4}), std::invalid_argument);      // sum != 1
  CHECK_THROWS_AS(dist_of({1.5, -0.5}), std::invalid_argument);     // negative
  CHECK_THROWS_AS(dist_of({}), std::invalid_argument);              // empty
}

TEST_CASE("property: top_k and min_p are idempotent") {
  Root root(321);
  auto stream = root.stream("idempotent");
  for (int trial = 0; trial < 200; ++trial) {
    const int v = 2 + static_cast<int>(stream.next_below(14));
    auto d = dist_of(random_probs(stream, v));
    const int k = 1 + static_cast<int>(stream.next_below(static_cast<std::uint64_t>(v)));
    auto once = top_k_filter(d, k);
    check_close(top_k_filter(once, k).probs(), once.probs());
    const double m = stream.next_double() * 0.95;
    auto once_m = min_p_filter(d, m);
    check_close(min_p_filter(once_m, m).probs(), once_m.probs());
  }
}

TEST_CASE("property: every transform keeps the top-probability entry") {
  Root root(654);
  auto stream = root.stream("argmax-keep");
  for (int trial = 0; trial < 200; ++trial) {
    const int v = 2 + static_cast<int>(stream.next_below(14));
    auto p = random_probs(stream, v);
    auto d = dist_of(p);
    const int top = argmax(d);
    const int k = 1 + static_cast<int>(stream.next_below(static_cast<std::uint64_t>(v)));
    CHECK(top_k_filter(d, k)[top] > 0.0);
    const double pp = 0.05 + 0.95 * stream.next_double();
    CHECK(top_p_filter(d, pp)[top] > 0.0);
    const double m = stream.next_double() * 0.95;
    CHECK(min_p_filter(d, m)[top] > 0.0);
    CHECK(argmax(top_k_filter(d, k)) == top);
    CHECK(argmax(top_p_filter(d, pp)) == top);
    CHECK(argmax(min_p_filter(d, m)) == top);
  }
}

TEST_CASE("property: off parameters return the input exactly") {
  Root root(987);
  auto stream = root.stream("off-params");
  for (int trial = 0; trial < 100; ++trial) {
    const int v = 2 + static_cast<int>(stream.next_below(14));
    auto p = random_probs(stream, v);
    auto d = dist_of(p);
    CHECK(top_k_filter(d, v).probs() == d.probs());
    CHECK(top_p_filter(d, 1.0).probs() == d.probs());
    CHECK(min_p_filter(d, 0.0).probs() == d.probs());
    std::vector<double> logits(p.size());
    for (size_t i = 0; i < p.size(); ++i) logits[i] = std::log(p[i]);
    CHECK(apply_temperature(Logits(logits), 1.0).values == logits);
  }
}

TEST_CASE("property: apply_action outputs a valid distribution") {
  Root root(111);
  auto stream = root.stream("valid-dist");
  for (int trial = 0; trial < 200; ++trial) {
    const int v = 2 + static_cast<int>(stream.next_below(30));
    std::vector<double> logits(static_cast<size_t>(v));
    for (double& z : logits) z = 6.0 * stream.next_gaussian();
    DecodingAction action = DecodingAction::sampling(
        0.3 + stream.next_double(),
        stream.next_double() < 0.5
            ? std::optional<int>(1 + static_cast<int>(stream.next_below(60)))
            : std::nullopt,
        stream.next_double() < 0.5 ? std::optional<double>(0.5 + 0.5 * stream.next_double())
                                   : std::nullopt,
        stream.next_double() < 0.5 ? std::optional<double>(0.5 * stream.next_double())
                                   : std::nullopt);
    auto d = apply_action(Logits(logits), action);
    double sum = 0.0;
    for (double x : d.probs()) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_SUITE_END();
