#pragma once

#include <cstdint>
#include <random>

namespace gridloc {

/// Derives an independent stream seed from a base seed and a stream index.
/// Splitmix64 finalizer; distinct (seed, index) pairs give uncorrelated
/// streams, so per-scan generators may be drawn in any order.
[[nodiscard]] inline std::uint64_t mix_seed(std::uint64_t seed,
                                            std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

[[nodiscard]] inline Rng make_rng(std::uint64_t seed, std::uint64_t index = 0) {
  return Rng{mix_seed(seed, index)};
}

}  // namespace gridloc
