#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "arousal/core/error.hpp"

namespace arousal::dsp {

struct ResampleConfig {
  double target_rate_hz = 128.0;
  double kaiser_beta = 5.0;
  int taps_per_phase = 10;
};

inline void validate(const ResampleConfig& c) {
  if (!(c.target_rate_hz > 0.0)) throw ConfigError("resample.target_rate_hz must be positive");
  if (!(c.kaiser_beta >= 0.0)) throw ConfigError("resample.kaiser_beta must be non-negative");
  if (c.taps_per_phase < 1) throw ConfigError("resample.taps_per_phase must be at least 1");
}

// Up/down factors L/M = target/in in lowest terms. Rates are taken to a
// millihertz grid first so that non-integer rates still reduce exactly.
inline std::pair<std::int64_t, std::int64_t> rational_factors(double in_rate_hz, double target_rate_hz) {
  const auto num = static_cast<std::int64_t>(std::llround(target_rate_hz * 1000.0));
  const auto den = static_cast<std::int64_t>(std::llround(in_rate_hz * 1000.0));
  if (num <= 0 || den <= 0) throw ConfigError("resampling rates must be positive");
  const auto g = std::gcd(num, den);
  return {num / g, den / g};
}

inline double kaiser(double x_over_halfwidth, double beta) {
  const double r = 1.0 - x_over_halfwidth * x_over_halfwidth;
  if (r < 0.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(r)) / std::cyl_bessel_i(0.0, beta);
}

// Kaiser-windowed sinc for the upsampled rate, centred on tap half_width,
// scaled by L to restore amplitude after zero stuffing.
inline std::vector<double> polyphase_prototype(std::int64_t up, std::int64_t down, const ResampleConfig& cfg) {
  const std::int64_t half = static_cast<std::int64_t>(cfg.taps_per_phase) * std::max(up, down);
  const double cutoff = 1.0 / static_cast<double>(std::max(up, down));  // fraction of pi
  std::vector<double> h(static_cast<std::size_t>(2 * half + 1));
  for (std::int64_t k = -half; k <= half; ++k) {
    const double t = static_cast<double>(k);
    const double arg = std::numbers::pi * cutoff * t;
    const double sinc = k == 0 ? 1.0 : std::sin(arg) / arg;
    h[static_cast<std::size_t>(k + half)] =
        static_cast<double>(up) * cutoff * sinc * kaiser(t / static_cast<double>(half), cfg.kaiser_beta);
  }
  return h;
}

// Output sample m sits at upsampled position m*M; the symmetric FIR is
// centred there, which cancels its group delay.
template <class T>
std::vector<T> resample_polyphase(std::span<const T> x, double in_rate_hz, const ResampleConfig& cfg = {}) {
  validate(cfg);
  if (!(in_rate_hz > 0.0)) throw ConfigError("input sample rate must be positive");
  const auto [up, down] = rational_factors(in_rate_hz, cfg.target_rate_hz);
  if (up == 1 && down == 1) return std::vector<T>(x.begin(), x.end());

  const auto h = polyphase_prototype(up, down, cfg);
  const auto half = static_cast<std::int64_t>(h.size() / 2);
  const auto n_in = static_cast<std::int64_t>(x.size());
  const auto n_out = (n_in * up + down - 1) / down;
  std::vector<T> y(static_cast<std::size_t>(n_out));
  for (std::int64_t m = 0; m < n_out; ++m) {
    const std::int64_t p = m * down;
    // j*L in [p - half, p + half]
    std::int64_t j_lo = p - half <= 0 ? 0 : (p - half + up - 1) / up;
    std::int64_t j_hi = std::min(n_in - 1, (p + half) / up);
    double acc = 0.0;
    for (std::int64_t j = j_lo; j <= j_hi; ++j)
      acc += h[static_cast<std::size_t>(p - j * up + half)] * static_cast<double>(x[static_cast<std::size_t>(j)]);
    y[static_cast<std::size_t>(m)] = static_cast<T>(acc);
  }
  return y;
}

template <class T>
std::vector<T> resample_polyphase(const std::vector<T>& x, double in_rate_hz, const ResampleConfig& cfg = {}) {
  return resample_polyphase(std::span<const T>(x), in_rate_hz, cfg);
}

}  // namespace arousal::dsp
