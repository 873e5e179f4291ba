#include "declab/categorical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace declab::categorical {

namespace {

void check_finite(const Logits& logits) {
  if (logits.values.empty()) {
    throw std::invalid_argument("logits must be non-empty");
  }
  for (double v : logits.values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("logits contain a non-finite entry");
    }
  }
}

std::vector<double> renormalized(std::vector<double> probs) {
  double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (sum <= 0.0) {
    throw std::invalid_argument("filter removed all probability mass");
  }
  for (double& p : probs) p /= sum;
  return probs;
}

/// Indices sorted by descending probability, lowest index first on ties.
std::vector<int> descending_order(const std::vector<double>& probs) {
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return a < b;
  });
  return order;
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

CategoricalDist::CategoricalDist(std::vector<double> probs)
    : probs_(std::move(probs)) {
  if (probs_.empty()) {
    throw std::invalid_argument("distribution must have at least one entry");
  }
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0)) {
      throw std::invalid_argument("distribution entries must be nonnegative");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw std::invalid_argument("distribution entries must sum to one");
  }
}

CategoricalDist CategoricalDist::point_mass(int index, int size) {
  if (size < 1 || index < 0 || index >= size) {
    throw std::invalid_argument("point_mass: index out of range");
  }
  std::vector<double> p(static_cast<size_t>(size), 0.0);
  p[static_cast<size_t>(index)] = 1.0;
  return CategoricalDist(std::move(p), Unchecked{});
}

DecodingAction DecodingAction::make_greedy() {
  DecodingAction a;
  a.greedy = true;
  return a;
}

DecodingAction DecodingAction::sampling(double temperature,
                                        std::optional<int> top_k,
                                        std::optional<double> top_p,
                                        std::optional<double> min_p) {
  DecodingAction a;
  a.temperature = temperature;
  a.top_k = top_k;
  a.top_p = top_p;
  a.min_p = min_p;
  a.validate();
  return a;
}

void DecodingAction::validate() const {
  if (greedy) {
    if (temperature || top_k || top_p || min_p) {
      throw std::invalid_argument(
          "greedy action must not set sampling parameters");
    }
    return;
  }
  if (!temperature || *temperature <= 0.0 || !std::isfinite(*temperature)) {
    throw std::invalid_argument(
        "sampling action requires a positive finite temperature");
  }
  if (top_k && *top_k < 1) {
    throw std::invalid_argument("top_k must be >= 1");
  }
  if (top_p && (*top_p <= 0.0 || *top_p > 1.0)) {
    throw std::invalid_argument("top_p must be in (0, 1]");
  }
  if (min_p && (*min_p < 0.0 || *min_p >= 1.0)) {
    throw std::invalid_argument("min_p must be in [0, 1)");
  }
}

std::string DecodingAction::key() const {
  if (greedy) return "greedy";
  std::string out = "T=" + format_number(*temperature);
  if (top_k) out += ",top_k=" + std::to_string(*top_k);
  if (top_p) out += ",top_p=" + format_number(*top_p);
  if (min_p) out += ",min_p=" + format_number(*min_p);
  return out;
}

CategoricalDist softmax(const Logits& logits) {
  check_finite(logits);
  const auto& z = logits.values;
  double zmax = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - zmax);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return CategoricalDist(std::move(p), CategoricalDist::Unchecked{});
}

Logits apply_temperature(const Logits& logits, double temperature) {
  check_finite(logits);
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("temperature must be positive and finite");
  }
  Logits out = logits;
  for (double& v : out.values) v /= temperature;
  return out;
}

CategoricalDist top_k_filter(const CategoricalDist& dist, int k) {
  if (k < 1) throw std::invalid_argument("top_k must be >= 1");
  if (k >= dist.size()) return dist;
  auto order = descending_order(dist.probs());
  std::vector<double> kept(dist.probs().size(), 0.0);
  for (int r = 0; r < k; ++r) {
    int idx = order[static_cast<size_t>(r)];
    kept[static_cast<size_t>(idx)] = dist.probs()[static_cast<size_t>(idx)];
  }
  return CategoricalDist(renormalized(std::move(kept)),
                         CategoricalDist::Unchecked{});
}

CategoricalDist top_p_filter(const CategoricalDist& dist, double p) {
  if (!(p > 0.0) || p > 1.0) {
    throw std::invalid_argument("top_p must be in (0, 1]");
  }
  if (p >= 1.0) return dist;
  auto order = descending_order(dist.probs());
  std::vector<double> kept(dist.probs().size(), 0.0);
  double cumulative = 0.0;
  for (int idx : order) {
    kept[static_cast<size_t>(idx)] = dist.probs()[static_cast<size_t>(idx)];
    cumulative += dist.probs()[static_cast<size_t>(idx)];
    if (cumulative >= p - kBoundarySlack) break;
  }
  return CategoricalDist(renormalized(std::move(kept)),
                         CategoricalDist::Unchecked{});
}

CategoricalDist min_p_filter(const CategoricalDist& dist, double m) {
  if (m < 0.0 || m >= 1.0) {
    throw std::invalid_argument("min_p must be in [0, 1)");
  }
  if (m == 0.0) return dist;
  double max_prob =
      *std::max_element(dist.probs().begin(), dist.probs().end());
  double threshold = m * max_prob;
  std::vector<double> kept(dist.probs().size(), 0.0);
  for (size_t i = 0; i < kept.size(); ++i) {
    if (dist.probs()[i] >= threshold - kBoundarySlack) {
      kept[i] = dist.probs()[i];
    }
  }
  return CategoricalDist(renormalized(std::move(kept)),
                         CategoricalDist::Unchecked{});
}

CategoricalDist apply_action(const Logits& logits,
                             const DecodingAction& action) {
  action.validate();
  check_finite(logits);
  if (action.greedy) {
    return CategoricalDist::point_mass(argmax(logits), logits.size());
  }
  CategoricalDist dist = softmax(apply_temperature(logits, *action.temperature));
  if (action.top_k) dist = top_k_filter(dist, *action.top_k);
  if (action.top_p) dist = top_p_filter(dist, *action.top_p);
  if (action.min_p) dist = min_p_filter(dist, *action.min_p);
  return dist;
}

double entropy(const CategoricalDist& dist) {
  double h = 0.0;
  for (double p : dist.probs()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h < 0.0 ? 0.0 : h;
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[static_cast<size_t>(i)] > values[static_cast<size_t>(best)]) {
      best = i;
    }
  }
  return best;
}

int argmax(const CategoricalDist& dist) { return argmax(dist.probs()); }

int argmax(const Logits& logits) {
  return argmax(std::span<const double>(logits.values));
}

int sample(const CategoricalDist& dist, rng::Stream& stream) {
  double u = stream.next_double();
  double cumulative = 0.0;
  int last_support = 0;
  for (int i = 0; i < dist.size(); ++i) {
    double p = dist[i];
    if (p > 0.0) last_support = i;
    cumulative += p;
    if (u < cumulative) return i;
  }
  // u landed in the rounding gap behind the last positive entry.
  return last_support;
}

}  // namespace declab::categorical
