#pragma once

/**
 * Counter-free deterministic random streams.
 *
 * Every source of randomness in the project is a Stream derived from one
 * root seed plus a label and up to three integer coordinates (component,
 * instance id, rollout id, ...). Streams derived from distinct coordinates
 * are statistically independent, and a stream's output depends only on its
 * derivation key, never on thread scheduling or call order elsewhere.
 */

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace declab::rng {

namespace detail {

// splitmix64 finalizer; also used to fold derivation keys together.
constexpr std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// A splitmix64 sequence. Cheap to construct, 8 bytes of state.
class Stream {
 public:
  explicit Stream(std::uint64_t state) : state_(state) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return detail::mix(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t next_below(std::uint64_t n) {
    std::uint64_t mask = n - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    for (;;) {
      std::uint64_t v = next_u64() & mask;
      if (v < n) return v;
    }
  }

  /// Standard normal via Box-Muller. Consumes two uniforms per call.
  double next_gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

/// Root of the randomness tree: one per run, derived from the config seed.
class Root {
 public:
  explicit Root(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  Stream stream(std::string_view label, std::uint64_t a = 0,
                std::uint64_t b = 0, std::uint64_t c = 0) const {
    std::uint64_t h = detail::mix(seed_ ^ 0x6a09e667f3bcc908ULL);
    h = detail::mix(h ^ detail::fnv1a(label));
    h = detail::mix(h ^ a);
    h = detail::mix(h ^ b);
    h = detail::mix(h ^ c);
    return Stream(h);
  }

 private:
  std::uint64_t seed_;
};

}  // namespace declab::rng
