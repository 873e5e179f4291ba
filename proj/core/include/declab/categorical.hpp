#pragma once

/**
 * Exact operations on finite categorical distributions.
 *
 * This is the decoding kernel: softmax over logits, the four sampling
 * transforms (temperature, top-k, top-p, min-p), greedy selection, entropy
 * and seeded sampling. Everything here is a pure function; all stochastic
 * behaviour takes an explicit rng::Stream.
 *
 * Conventions, fixed so results are reproducible:
 *  - A composed action applies temperature to the logits, softmaxes, then
 *    filters in the order top-k, top-p, min-p, renormalizing after each.
 *  - Ties (equal probabilities, equal logits) always resolve to the lowest
 *    index.
 *  - Cumulative-mass and threshold comparisons carry an absolute slack of
 *    1e-12 so that decimal literals behave as in exact arithmetic
 *    (0.5 + 0.3 counts as reaching 0.8).
 *  - "Off" parameter values (k >= V, p = 1, m = 0) return the input
 *    distribution bit-for-bit unchanged.
 *  - min-p thresholds against the maximum of the distribution entering the
 *    min-p stage, i.e. after any earlier truncation.
 *  - Entropy is in nats.
 */

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "declab/rng.hpp"

namespace declab::categorical {

/// Absolute slack used in filter boundary comparisons.
inline constexpr double kBoundarySlack = 1e-12;

/// Tolerance on the sum-to-one invariant of CategoricalDist.
inline constexpr double kSumTolerance = 1e-9;

/// Raw next-token scores. All entries must be finite.
struct Logits {
  std::vector<double> values;

  Logits() = default;
  explicit Logits(std::vector<double> v) : values(std::move(v)) {}
  int size() const { return static_cast<int>(values.size()); }
};

/// Probability vector over a vocabulary of size V >= 1. Construction
/// validates nonnegativity and that entries sum to one within kSumTolerance.
class CategoricalDist {
 public:
  explicit CategoricalDist(std::vector<double> probs);

  const std::vector<double>& probs() const { return probs_; }
  double operator[](int i) const { return probs_[static_cast<size_t>(i)]; }
  int size() const { return static_cast<int>(probs_.size()); }

  /// Point mass on `index` over a vocabulary of size `size`.
  static CategoricalDist point_mass(int index, int size);

 private:
  struct Unchecked {};
  CategoricalDist(std::vector<double> probs, Unchecked) : probs_(std::move(probs)) {}

  std::vector<double> probs_;

  friend CategoricalDist softmax(const Logits&);
  friend CategoricalDist top_k_filter(const CategoricalDist&, int);
  friend CategoricalDist top_p_filter(const CategoricalDist&, double);
  friend CategoricalDist min_p_filter(const CategoricalDist&, double);
};

/**
 * One sampling configuration: either greedy (argmax) decoding or stochastic
 * sampling with a mandatory temperature and optional truncation filters.
 *
 * Invariants, checked by validate():
 *  - greedy => no other field is set
 *  - not greedy => temperature is set and > 0
 */
struct DecodingAction {
  bool greedy = false;
  std::optional<double> temperature;
  std::optional<int> top_k;
  std::optional<double> top_p;
  std::optional<double> min_p;

  static DecodingAction make_greedy();
  static DecodingAction sampling(double temperature,
                                 std::optional<int> top_k = std::nullopt,
                                 std::optional<double> top_p = std::nullopt,
                                 std::optional<double> min_p = std::nullopt);

  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;

  /// Canonical text form, e.g. "greedy" or "T=1.25,top_k=10,top_p=0.9".
  /// Stable across runs; used as strategy id and for action-set matching.
  std::string key() const;

  bool operator==(const DecodingAction&) const = default;
};

/// Numerically stable softmax (max subtraction). Throws on non-finite input.
CategoricalDist softmax(const Logits& logits);

/// Divides every logit by T. Throws std::invalid_argument unless T > 0.
Logits apply_temperature(const Logits& logits, double temperature);

/// Keeps the k highest-probability entries (lowest index wins ties), zeros
/// the rest and renormalizes. k >= V is the identity.
CategoricalDist top_k_filter(const CategoricalDist& dist, int k);

/// Keeps the smallest descending-probability prefix whose cumulative mass
/// reaches p (within kBoundarySlack), zeros the rest and renormalizes.
/// p = 1 is the identity.
CategoricalDist top_p_filter(const CategoricalDist& dist, double p);

/// Keeps entries with probability >= m * max(probs) (within kBoundarySlack),
/// zeros the rest and renormalizes. m = 0 is the identity.
CategoricalDist min_p_filter(const CategoricalDist& dist, double m);

/// Applies a full decoding action to raw logits. Greedy yields a point mass
/// on the argmax; otherwise temperature, softmax, then the set filters in
/// the fixed order top-k -> top-p -> min-p.
CategoricalDist apply_action(const Logits& logits, const DecodingAction& action);

/// Shannon entropy in nats, with 0 * log 0 = 0.
double entropy(const CategoricalDist& dist);

/// Index of the largest entry, lowest index on ties.
int argmax(std::span<const double> values);
int argmax(const CategoricalDist& dist);
int argmax(const Logits& logits);

/// Draws an index i with probability probs[i]. Deterministic given the
/// stream state.
int sample(const CategoricalDist& dist, rng::Stream& stream);

}  // namespace declab::categorical
