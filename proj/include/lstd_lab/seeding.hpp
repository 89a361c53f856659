#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace lstd_lab {

/// SplitMix64 output function.  A bijection on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives a child seed from a base seed and a packed word.  Distinct words
/// give distinct children for a fixed base (composition of bijections).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t word) noexcept {
  return splitmix64(base ^ splitmix64(word));
}

using Engine = std::mt19937_64;

inline double uniform01(Engine& rng) { return std::generate_canonical<double, 64>(rng); }

/// Pairwise (cascade) summation; order-fixed for a given length.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace lstd_lab
