#pragma once

// Butterworth IIR design via analog prototype -> frequency transform ->
// bilinear transform with pre-warping, realized as second-order sections.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "arousal/core/error.hpp"

namespace arousal::dsp {

enum class FilterKind { kBandpass, kHighpass };

struct FilterSpec {
  FilterKind kind = FilterKind::kBandpass;
  int order = 2;                // prototype order
  double low_hz = 0.3;          // highpass cutoff when kind == kHighpass
  double high_hz = 35.0;        // unused for highpass
  double sample_rate_hz = 128.0;

  static FilterSpec bandpass(int order, double low, double high, double fs) {
    return {FilterKind::kBandpass, order, low, high, fs};
  }
  static FilterSpec highpass(int order, double cutoff, double fs) {
    return {FilterKind::kHighpass, order, cutoff, 0.0, fs};
  }
};

// y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

struct BiquadCascade {
  std::vector<Biquad> sections;

  std::complex<double> response(double f_hz, double fs) const {
    const auto z1 = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / fs);  // z^-1
    const auto z2 = z1 * z1;
    std::complex<double> h = 1.0;
    for (const auto& s : sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    return h;
  }

  double magnitude(double f_hz, double fs) const { return std::abs(response(f_hz, fs)); }

  // Roots of z^2 + a1 z + a2 for every section (first-order sections yield one root).
  std::vector<std::complex<double>> poles() const {
    std::vector<std::complex<double>> out;
    for (const auto& s : sections) {
      if (s.a2 == 0.0) {
        out.emplace_back(-s.a1, 0.0);
        continue;
      }
      const auto disc = std::sqrt(std::complex<double>(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
      out.push_back((-s.a1 + disc) / 2.0);
      out.push_back((-s.a1 - disc) / 2.0);
    }
    return out;
  }

  bool stable() const {
    for (const auto& p : poles())
      if (std::abs(p) >= 1.0) return false;
    return true;
  }
};

inline void validate(const FilterSpec& spec) {
  const double nyq = spec.sample_rate_hz / 2.0;
  if (!(spec.sample_rate_hz > 0.0)) throw DesignError("filter sample rate must be positive");
  if (spec.order < 1) throw DesignError("filter order must be at least 1");
  if (!(spec.low_hz > 0.0) || spec.low_hz >= nyq)
    throw DesignError("cutoff " + std::to_string(spec.low_hz) + " Hz must lie strictly inside (0, " +
                      std::to_string(nyq) + ") Hz");
  if (spec.kind == FilterKind::kBandpass) {
    if (!(spec.high_hz > 0.0) || spec.high_hz >= nyq)
      throw DesignError("cutoff " + std::to_string(spec.high_hz) + " Hz must lie strictly inside (0, " +
                        std::to_string(nyq) + ") Hz");
    if (!(spec.low_hz < spec.high_hz)) throw DesignError("bandpass needs low cutoff < high cutoff");
  }
}

namespace detail {

using cplx = std::complex<double>;

inline cplx bilinear(cplx s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

inline Biquad section_from(cplx p1, cplx p2, cplx z1, cplx z2) {
  Biquad q;
  q.b0 = 1.0;
  q.b1 = -(z1 + z2).real();
  q.b2 = (z1 * z2).real();
  q.a1 = -(p1 + p2).real();
  q.a2 = (p1 * p2).real();
  return q;
}

inline Biquad first_order_from(cplx p, cplx z) {
  return {1.0, -z.real(), 0.0, -p.real(), 0.0};
}

}  // namespace detail

inline BiquadCascade design_butterworth(const FilterSpec& spec) {
  using detail::cplx;
  validate(spec);
  const int n = spec.order;
  const double fs = spec.sample_rate_hz;
  auto warp = [fs](double f) { return 2.0 * fs * std::tan(std::numbers::pi * f / fs); };

  // Prototype poles in the upper half plane (plus the real pole for odd n).
  std::vector<cplx> upper;
  bool has_real = false;
  for (int k = 0; k < n; ++k) {
    const cplx p = std::polar(1.0, std::numbers::pi * (2.0 * k + n + 1) / (2.0 * n));
    if (std::abs(p.imag()) < 1e-12)
      has_real = true;
    else if (p.imag() > 0)
      upper.push_back(p);
  }

  BiquadCascade out;
  double ref_hz = 0.0;
  if (spec.kind == FilterKind::kHighpass) {
    const double wc = warp(spec.low_hz);
    const cplx zero = 1.0;  // analog zeros at s = 0 map to z = 1
    for (const auto& p : upper) {
      const auto zp = detail::bilinear(wc / p, fs);
      out.sections.push_back(detail::section_from(zp, std::conj(zp), zero, zero));
    }
    if (has_real) out.sections.push_back(detail::first_order_from(detail::bilinear(-wc, fs), zero));
    ref_hz = fs / 2.0;
  } else {
    const double w1 = warp(spec.low_hz), w2 = warp(spec.high_hz);
    const double w0sq = w1 * w2, bw = w2 - w1;
    // Each bandpass section gets one zero at DC (z = 1) and one at Nyquist (z = -1).
    const cplx zdc = 1.0, zny = -1.0;
    auto split = [&](cplx p) {
      const cplx disc = std::sqrt(p * p * bw * bw - 4.0 * w0sq);
      return std::pair{(p * bw + disc) / 2.0, (p * bw - disc) / 2.0};
    };
    for (const auto& p : upper) {
      const auto [q1, q2] = split(p);
      for (const auto& q : {q1, q2}) {
        const auto zq = detail::bilinear(q, fs);
        out.sections.push_back(detail::section_from(zq, std::conj(zq), zdc, zny));
      }
    }
    if (has_real) {
      const auto [q1, q2] = split(cplx(-1.0, 0.0));
      out.sections.push_back(
          detail::section_from(detail::bilinear(q1, fs), detail::bilinear(q2, fs), zdc, zny));
    }
    ref_hz = fs / std::numbers::pi * std::atan(std::sqrt(w0sq) / (2.0 * fs));
  }

  // Unit gain at the passband reference (Nyquist for highpass, the mapped
  // analog centre frequency for bandpass).
  const double g = out.magnitude(ref_hz, fs);
  const double per = std::pow(1.0 / g, 1.0 / static_cast<double>(out.sections.size()));
  for (auto& s : out.sections) {
    s.b0 *= per;
    s.b1 *= per;
    s.b2 *= per;
  }
  return out;
}

// Causal single pass, direct form II transposed, fresh state.
template <class T>
std::vector<T> filter_signal(const BiquadCascade& cascade, std::span<const T> x) {
  std::vector<double> y(x.begin(), x.end());
  for (const auto& s : cascade.sections) {
    double s1 = 0.0, s2 = 0.0;
    for (auto& v : y) {
      const double in = v;
      const double out = s.b0 * in + s1;
      s1 = s.b1 * in - s.a1 * out + s2;
      s2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return std::vector<T>(y.begin(), y.end());
}

template <class T>
std::vector<T> filter_signal(const BiquadCascade& cascade, const std::vector<T>& x) {
  return filter_signal(cascade, std::span<const T>(x));
}

}  // namespace arousal::dsp
