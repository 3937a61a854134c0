#pragma once
// Counter-based random numbers. Every variate is a pure function of
// (seed, counter) so streams can be consumed in any order by any number of
// workers and still reproduce bit-for-bit.

#include <array>
#include <cstdint>

#include "rsreg/specfun.hpp"

namespace rsreg::rng {

/// Philox4x32-10 (Salmon et al., Random123).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit constexpr Philox4x32(Key key) : key_(key) {}
  explicit constexpr Philox4x32(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  constexpr Counter operator()(Counter ctr) const {
    Key k = key_;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        k[0] += 0x9E3779B9u;
        k[1] += 0xBB67AE85u;
      }
      ctr = single_round(ctr, k);
    }
    return ctr;
  }

 private:
  static constexpr Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
    const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  Key key_;
};

/// Independent purposes drawing from one seed never share counters.
enum class Stream : std::uint32_t {
  input_noise = 0,
  sphere_direction = 1,
  trial_noise = 2,
  lattice_shift = 3,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Child seed for sub-experiment `index` under `tag`.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag,
                                           std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(tag ^ splitmix64(index)));
}

/// 64 random bits at (stream, index, coordinate).
inline constexpr std::uint64_t bits64(std::uint64_t seed, Stream stream, std::uint64_t index,
                                      std::uint32_t coordinate) {
  const Philox4x32 gen(seed);
  const auto out = gen({static_cast<std::uint32_t>(index),
                        static_cast<std::uint32_t>(index >> 32), coordinate,
                        static_cast<std::uint32_t>(stream)});
  return (std::uint64_t{out[1]} << 32) | out[0];
}

/// Uniform in the open interval (0, 1) with 53 bits of resolution.
inline constexpr double uniform01(std::uint64_t seed, Stream stream, std::uint64_t index,
                                  std::uint32_t coordinate) {
  const std::uint64_t mantissa = bits64(seed, stream, index, coordinate) >> 11;
  return (static_cast<double>(mantissa) + 0.5) * 0x1.0p-53;
}

/// Standard normal variate by inverse CDF of uniform01.
inline double standard_normal(std::uint64_t seed, Stream stream, std::uint64_t index,
                              std::uint32_t coordinate) {
  return specfun::std_normal_quantile(uniform01(seed, stream, index, coordinate));
}

}  // namespace rsreg::rng
