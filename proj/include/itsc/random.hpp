#pragma once

// Seeded RNG helpers. Every stream in the project is derived from a user
// seed through mix_seed so that per-epoch / per-split streams never collide.

#include <cstdint>
#include <random>

#include "core.hpp"

namespace itsc {

using Rng = std::mt19937_64;

// splitmix64 finalizer; good avalanche for combining seed material
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform init in +-sqrt(1/fan_in); draws in double so float and double
// models built from the same seed agree to rounding.
template <class Real>
void uniform_init(Matrix<Real>& w, int fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : w.data) v = static_cast<Real>(dist(rng));
}

}  // namespace itsc
