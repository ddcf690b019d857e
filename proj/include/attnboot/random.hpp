// Reproducible random streams.
//
// Every stochastic stage draws from its own `RandomStream`, seeded from a
// 64-bit run seed and a stream index through `mix_seed`. The stream engine is
// std::mt19937_64, whose output sequence is fixed by the standard; the
// conversions to uniform and normal variates below are written out
// explicitly instead of using <random> distributions, whose algorithms are
// implementation-defined.

#pragma once

#include <unsupported/Eigen/SpecialFunctions>

#include <cstdint>
#include <limits>
#include <random>

namespace attnboot {

/// SplitMix64 output function (Steele, Lea & Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of stream `index` under run seed `seed`:
///   mix_seed(seed, index) = splitmix64(seed + (index + 1) * 0x9E3779B97F4A7C15)
/// Bootstrap replicate b (1-based) uses mix_seed(seed, b).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(seed + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal by inverse CDF of one uniform draw.
  double normal() { return Eigen::numext::ndtri(uniform()); }

  /// Uniform integer in [0, bound), unbiased (rejection on the 64-bit range).
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace attnboot
