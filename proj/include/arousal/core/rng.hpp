#pragma once

// Portable, fully specified random number generation.
//
// Every stochastic step in the library draws from Rng so that any other
// implementation following the same recipe reproduces the same streams:
//
//   seeding      SplitMix64(seed) is stepped four times to fill the
//                xoshiro256** state words s[0..3] in order.
//   next_u64     xoshiro256** (Blackman & Vigna, 2018).
//   uniform()    (next_u64() >> 11) * 2^-53, a double in [0, 1).
//   normal()     Box-Muller, cosine branch only: u1 = 1 - uniform(),
//                u2 = uniform(), sqrt(-2 ln u1) * cos(2 pi u2).
//   poisson(m)   Knuth's product-of-uniforms: L = exp(-m), k = 0, p = 1;
//                repeat { k += 1; p *= uniform(); } while p > L; return k - 1.
//   below(n)     floor(uniform() * n).
//   derive(a,b)  child seed = splitmix64 output after mixing (seed, a, b);
//                used to give each (record, purpose) pair its own stream.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace arousal {

inline std::uint64_t splitmix64_next(std::uint64_t& state) noexcept {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Deterministic child seed for an independent stream keyed by (a, b).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept {
  std::uint64_t s = seed;
  std::uint64_t x = splitmix64_next(s);
  s = x ^ (a * 0xD1B54A32D192ED03ULL);
  x = splitmix64_next(s);
  s = x ^ (b * 0x8CB92BA72F3D8DD7ULL);
  return splitmix64_next(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

  void reseed(std::uint64_t seed) noexcept {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64_next(sm);
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  double normal() noexcept {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t below(std::uint64_t n) noexcept {
    auto k = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  std::uint64_t poisson(double mean) noexcept {
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  // For UniformRandomBitGenerator use with <algorithm>.
  using result_type = std::uint64_t;
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }
  result_type operator()() noexcept { return next_u64(); }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4]{};
};

// Fisher-Yates with below(); std::shuffle is implementation-defined.
template <class It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.below(i);
    std::iter_swap(first + (i - 1), first + j);
  }
}

}  // namespace arousal
