#ifndef HYBRIDCAV_RANDOM_HPP
#define HYBRIDCAV_RANDOM_HPP

// Counter-based random numbers: draw k of sample i depends only on
// (seed, i, k), so sampled ensembles are identical however the work is chunked.

#include <cmath>
#include <cstdint>

#include "hybridcav/units.hpp"

namespace hybridcav {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class CounterRng {
public:
  explicit constexpr CounterRng(std::uint64_t seed) : key_(splitmix64(seed)) {}

  // Uniform in [0, 1) with 53 random bits.
  constexpr double uniform(std::uint64_t index, std::uint32_t draw) const {
    const std::uint64_t word = splitmix64(key_ ^ splitmix64(index * 8u + draw));
    return static_cast<double>(word >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller on two draws.
  double normal(std::uint64_t index, std::uint32_t draw) const {
    const double u1 = 1.0 - uniform(index, draw);
    const double u2 = uniform(index, draw + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

private:
  std::uint64_t key_;
};

} // namespace hybridcav

#endif // HYBRIDCAV_RANDOM_HPP
