#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace i2c {

using Rng = std::mt19937_64;

/// Seed for the named substream of a root seed. Distinct names give
/// statistically independent streams; the mapping is stable across runs.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

inline Rng make_rng(std::uint64_t root, std::string_view stream) {
  return Rng(derive_seed(root, stream));
}

/// Uniform in [0, 1).
inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace i2c
