#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace fedledger {

// std::*_distribution output is implementation-defined; everything that must
// replay bit-identically across platforms draws through these helpers.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a root seed and a tag.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag) {
  return splitmix64(root ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

/// Uniform in [0, 1) with 53 bits of precision.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    auto j = uniform_index(rng, i);
    std::iter_swap(first + (i - 1), first + j);
  }
}

}  // namespace fedledger
