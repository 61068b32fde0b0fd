#pragma once

// Synthetic polysomnography records with planted arousal events.
//
// Record `index` of a config with seed S is produced from four independent
// Rng streams (see core/rng.hpp for the exact generator recipe):
//
//   derive_seed(S, index, 3)  one uniform; record is eventless if < eventless_fraction
//   derive_seed(S, index, 1)  event layout: count = poisson(events_per_record) (forced
//                             to 0 for eventless records, the draw is still taken),
//                             then per event up to kPlacementAttempts tries of
//                             duration = uniform(min, max), start = uniform(0, D - duration);
//                             a try is accepted when it keeps kMinEventGap seconds from
//                             every accepted event
//   derive_seed(S, index, 2)  background: per channel in canonical order, next_pow2(n)
//                             normals, FFT-shaped to PSD ~ 1/f^beta (DC removed),
//                             first n samples kept, scaled to unit standard deviation
//   derive_seed(S, index, 4)  bursts: per event, next_pow2(m) normals band-limited to
//                             [16, 40] Hz by FFT masking, first m kept, unit RMS, tapered
//
// EEG/EOG channels add gain * event_snr * burst; EMG is multiplied by
// 1 + kEmgGain * event_snr * taper over each event.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "arousal/core/error.hpp"
#include "arousal/core/rng.hpp"
#include "arousal/dsp/fft.hpp"
#include "arousal/synthdata/record.hpp"

namespace arousal {

struct GeneratorConfig {
  std::size_t n_records = 60;
  double record_duration_s = 600.0;
  double channel_sample_rate_hz = 256.0;
  double events_per_record = 20.0;
  double event_duration_min_s = 3.0;
  double event_duration_max_s = 15.0;
  double event_snr = 1.0;
  double background_spectrum_exponent = 1.0;
  double eventless_fraction = 0.05;
  std::uint64_t rng_seed = 1;
};

inline constexpr double kMinEventGap = 1.0;
inline constexpr int kPlacementAttempts = 100;
inline constexpr double kBurstLowHz = 16.0;
inline constexpr double kBurstHighHz = 40.0;
inline constexpr double kBurstTaperS = 0.5;
inline constexpr double kEmgGain = 0.5;
// Burst gain per canonical channel; EMG carries an envelope change instead.
inline constexpr double kBurstGain[5] = {1.0, 1.0, 0.6, 0.6, 0.0};

inline void validate(const GeneratorConfig& c) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("generator." + field + ": " + why);
  };
  if (c.n_records == 0) fail("n_records", "must be positive");
  if (!(c.record_duration_s > 0.0)) fail("record_duration_s", "must be positive");
  if (!(c.channel_sample_rate_hz > 0.0)) fail("channel_sample_rate_hz", "must be positive");
  if (c.channel_sample_rate_hz <= 2.0 * kBurstHighHz)
    fail("channel_sample_rate_hz", "must exceed twice the 40 Hz burst band edge");
  if (!(c.events_per_record >= 0.0)) fail("events_per_record", "must be non-negative");
  if (c.event_duration_min_s < 3.0) fail("event_duration_min_s", "must be at least 3 s");
  if (c.event_duration_max_s > 15.0) fail("event_duration_max_s", "must be at most 15 s");
  if (c.event_duration_min_s > c.event_duration_max_s)
    fail("event_duration_min_s", "must not exceed event_duration_max_s");
  if (c.event_duration_max_s + 2 * kMinEventGap > c.record_duration_s)
    fail("record_duration_s", "too short to hold a single event");
  if (!(c.event_snr >= 0.0)) fail("event_snr", "must be non-negative");
  if (!std::isfinite(c.background_spectrum_exponent))
    fail("background_spectrum_exponent", "must be finite");
  if (!(c.eventless_fraction >= 0.0 && c.eventless_fraction <= 1.0))
    fail("eventless_fraction", "must lie in [0, 1]");
}

inline void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = {{"n_records", c.n_records},
       {"record_duration_s", c.record_duration_s},
       {"channel_sample_rate_hz", c.channel_sample_rate_hz},
       {"events_per_record", c.events_per_record},
       {"event_duration_range_s", {c.event_duration_min_s, c.event_duration_max_s}},
       {"event_snr", c.event_snr},
       {"background_spectrum_exponent", c.background_spectrum_exponent},
       {"eventless_fraction", c.eventless_fraction},
       {"rng_seed", c.rng_seed}};
}

// Missing keys keep their defaults; present keys with the wrong type raise a
// ConfigError naming the field.
inline void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  auto read = [&j](const char* key, auto& dst) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(dst);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("generator.") + key + ": wrong type");
    }
  };
  read("n_records", c.n_records);
  read("record_duration_s", c.record_duration_s);
  read("channel_sample_rate_hz", c.channel_sample_rate_hz);
  read("events_per_record", c.events_per_record);
  if (j.contains("event_duration_range_s")) {
    const auto& r = j.at("event_duration_range_s");
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
      throw ConfigError("generator.event_duration_range_s: expected [min, max]");
    c.event_duration_min_s = r[0].get<double>();
    c.event_duration_max_s = r[1].get<double>();
  }
  read("event_snr", c.event_snr);
  read("background_spectrum_exponent", c.background_spectrum_exponent);
  read("eventless_fraction", c.eventless_fraction);
  read("rng_seed", c.rng_seed);
}

// A record plus the noise-free C3 burst component that was planted in it.
struct GeneratedRecord {
  SignalRecord record;
  std::vector<double> clean_burst;
};

inline std::string record_id_for(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "psg%05zu", index);
  return buf;
}

namespace detail {

inline std::vector<EventInterval> plant_events(const GeneratorConfig& cfg, std::size_t index) {
  Rng gate(derive_seed(cfg.rng_seed, index, 3));
  const bool eventless = gate.uniform() < cfg.eventless_fraction;

  Rng rng(derive_seed(cfg.rng_seed, index, 1));
  auto count = rng.poisson(cfg.events_per_record);
  if (eventless) count = 0;

  std::vector<EventInterval> events;
  for (std::uint64_t k = 0; k < count; ++k) {
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      const double d = rng.uniform(cfg.event_duration_min_s, cfg.event_duration_max_s);
      const double s = rng.uniform(0.0, cfg.record_duration_s - d);
      const bool clear = std::all_of(events.begin(), events.end(), [&](const EventInterval& e) {
        return s >= e.end_s() + kMinEventGap || s + d + kMinEventGap <= e.start_s;
      });
      if (clear) {
        events.push_back({s, d, kArousalLabel});
        break;
      }
    }
  }
  std::sort(events.begin(), events.end(),
            [](const EventInterval& a, const EventInterval& b) { return a.start_s < b.start_s; });
  return events;
}

inline std::vector<double> colored_noise(Rng& rng, std::size_t n, double fs, double beta) {
  const std::size_t m = dsp::next_pow2(n);
  std::vector<std::complex<double>> spec(m);
  for (auto& v : spec) v = {rng.normal(), 0.0};
  dsp::fft(spec);
  spec[0] = 0.0;
  for (std::size_t k = 1; k < m; ++k) {
    const std::size_t kk = std::min(k, m - k);
    const double f = static_cast<double>(kk) * fs / static_cast<double>(m);
    spec[k] *= std::pow(f, -0.5 * beta);
  }
  dsp::fft(spec, /*inverse=*/true);
  std::vector<double> out(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += out[i] = spec[i].real();
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (auto& v : out) {
    v -= mean;
    var += v * v;
  }
  const double sd = std::sqrt(var / static_cast<double>(n));
  for (auto& v : out) v /= sd;
  return out;
}

inline double taper(std::size_t i, std::size_t m, std::size_t ramp) {
  if (ramp == 0) return 1.0;
  const std::size_t edge = std::min(i, m - 1 - i);
  if (edge >= ramp) return 1.0;
  return 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(edge) / static_cast<double>(ramp));
}

inline std::vector<double> burst(Rng& rng, std::size_t m, double fs) {
  const std::size_t len = dsp::next_pow2(m);
  std::vector<std::complex<double>> spec(len);
  for (auto& v : spec) v = {rng.normal(), 0.0};
  dsp::fft(spec);
  for (std::size_t k = 0; k < len; ++k) {
    const std::size_t kk = std::min(k, len - k);
    const double f = static_cast<double>(kk) * fs / static_cast<double>(len);
    if (f < kBurstLowHz || f > kBurstHighHz) spec[k] = 0.0;
  }
  dsp::fft(spec, /*inverse=*/true);
  std::vector<double> out(m);
  double ss = 0.0;
  for (std::size_t i = 0; i < m; ++i) ss += (out[i] = spec[i].real()) * out[i];
  const double rms = std::sqrt(ss / static_cast<double>(m));
  const auto ramp = std::min<std::size_t>(static_cast<std::size_t>(kBurstTaperS * fs), m / 2);
  for (std::size_t i = 0; i < m; ++i) out[i] = (rms > 0 ? out[i] / rms : 0.0) * taper(i, m, ramp);
  return out;
}

}  // namespace detail

inline GeneratedRecord generate_record_with_truth(const GeneratorConfig& cfg, std::size_t index) {
  validate(cfg);
  if (index >= cfg.n_records)
    throw ConfigError("record index " + std::to_string(index) + " out of range for n_records " +
                      std::to_string(cfg.n_records));

  const double fs = cfg.channel_sample_rate_hz;
  GeneratedRecord out;
  SignalRecord& r = out.record;
  r.record_id = record_id_for(index);
  r.sample_rate_hz = fs;
  r.duration_s = cfg.record_duration_s;
  r.events = detail::plant_events(cfg, index);
  const std::size_t n = r.expected_samples();

  Rng noise(derive_seed(cfg.rng_seed, index, 2));
  std::vector<std::vector<double>> signals;
  for (std::size_t c = 0; c < kCanonicalChannels.size(); ++c)
    signals.push_back(detail::colored_noise(noise, n, fs, cfg.background_spectrum_exponent));

  out.clean_burst.assign(n, 0.0);
  std::vector<double> envelope(n, 0.0);
  Rng bursts(derive_seed(cfg.rng_seed, index, 4));
  for (const auto& e : r.events) {
    const auto first = static_cast<std::size_t>(std::llround(e.start_s * fs));
    const auto last = std::min(n, static_cast<std::size_t>(std::llround(e.end_s() * fs)));
    if (last <= first) continue;
    const std::size_t m = last - first;
    const auto b = detail::burst(bursts, m, fs);
    const auto ramp = std::min<std::size_t>(static_cast<std::size_t>(kBurstTaperS * fs), m / 2);
    for (std::size_t i = 0; i < m; ++i) {
      out.clean_burst[first + i] = b[i];
      envelope[first + i] = detail::taper(i, m, ramp);
    }
  }

  for (std::size_t c = 0; c < kCanonicalChannels.size(); ++c) {
    Channel ch{std::string(kCanonicalChannels[c]), std::vector<float>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      double v = signals[c][i];
      if (kBurstGain[c] > 0.0)
        v += kBurstGain[c] * cfg.event_snr * out.clean_burst[i];
      else
        v *= 1.0 + kEmgGain * cfg.event_snr * envelope[i];
      ch.samples[i] = static_cast<float>(v);
    }
    r.channels.push_back(std::move(ch));
  }
  return out;
}

inline SignalRecord generate_record(const GeneratorConfig& cfg, std::size_t index) {
  return generate_record_with_truth(cfg, index).record;
}

}  // namespace arousal
