#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>

namespace uiharvest {

// All seeded randomness flows through this engine. The helpers below avoid
// the standard distributions so draws are identical across standard libraries.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 bits of entropy.
inline double unit_real(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t bound = n;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

/// Index drawn with probability proportional to weights[i]. Non-positive
/// weights are never chosen; returns nullopt when the total is zero.
inline std::optional<std::size_t> weighted_index(
    Rng& rng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w > 0.0) total += w;
  }
  if (!(total > 0.0)) return std::nullopt;
  const double target = unit_real(rng) * total;
  double acc = 0.0;
  std::optional<std::size_t> last;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0)) continue;
    acc += weights[i];
    last = i;
    if (target < acc) return i;
  }
  return last;  // rounding at the upper edge
}

}  // namespace uiharvest
