#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arousal/dsp/butterworth.hpp"
#include "arousal/dsp/resample.hpp"
#include "arousal/synthdata/record.hpp"

namespace arousal::dsp {

inline constexpr double kSigmaFloor = 1e-8;

struct Standardized {
  std::vector<std::vector<double>> samples;
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<bool> flagged;  // sigma fell below kSigmaFloor and was replaced by 1
};

// Per-channel (x - mu) / sigma with population statistics.
inline Standardized standardize(const std::vector<std::vector<double>>& channels) {
  Standardized out;
  for (const auto& x : channels) {
    const auto n = static_cast<double>(x.size());
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= n;
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    double sigma = std::sqrt(var / n);
    const bool flag = sigma < kSigmaFloor;
    if (flag) sigma = 1.0;
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mu) / sigma;
    out.samples.push_back(std::move(z));
    out.mean.push_back(mu);
    out.stddev.push_back(sigma);
    out.flagged.push_back(flag);
  }
  return out;
}

struct PipelineConfig {
  ResampleConfig resample{};
  int eeg_eog_order = 2;
  double eeg_eog_low_hz = 0.3;
  double eeg_eog_high_hz = 35.0;
  int emg_order = 4;
  double emg_cutoff_hz = 10.0;
  // Channels to keep, in output order; empty keeps every channel of the record.
  std::vector<std::string> channels;
};

enum class Modality { kEeg, kEog, kEmg };

inline Modality modality_of(std::string_view name) {
  if (name.starts_with("EEG")) return Modality::kEeg;
  if (name.starts_with("EOG")) return Modality::kEog;
  if (name.starts_with("EMG")) return Modality::kEmg;
  throw MappingError("channel '" + std::string(name) + "' has no known modality (expected EEG-*, EOG-* or EMG-*)");
}

inline FilterSpec filter_for(Modality m, const PipelineConfig& cfg) {
  const double fs = cfg.resample.target_rate_hz;
  if (m == Modality::kEmg) return FilterSpec::highpass(cfg.emg_order, cfg.emg_cutoff_hz, fs);
  return FilterSpec::bandpass(cfg.eeg_eog_order, cfg.eeg_eog_low_hz, cfg.eeg_eog_high_hz, fs);
}

struct PreprocessedRecord {
  SignalRecord record;
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<bool> flagged;
};

// Resample to the target rate, filter by modality, standardize. Event
// annotations pass through untouched.
inline PreprocessedRecord preprocess_record_with_stats(const SignalRecord& in, const PipelineConfig& cfg = {}) {
  std::vector<const Channel*> selected;
  if (cfg.channels.empty()) {
    for (const auto& c : in.channels) selected.push_back(&c);
  } else {
    for (const auto& name : cfg.channels) {
      const auto* c = in.find(name);
      if (!c) throw MappingError("record '" + in.record_id + "' has no channel '" + name + "'");
      selected.push_back(c);
    }
  }

  std::vector<std::vector<double>> filtered;
  for (const auto* c : selected) {
    const auto cascade = design_butterworth(filter_for(modality_of(c->name), cfg));
    std::vector<double> x(c->samples.begin(), c->samples.end());
    auto r = resample_polyphase<double>(x, in.sample_rate_hz, cfg.resample);
    filtered.push_back(filter_signal<double>(cascade, r));
  }
  auto z = standardize(filtered);

  PreprocessedRecord out;
  out.record.record_id = in.record_id;
  out.record.sample_rate_hz = cfg.resample.target_rate_hz;
  out.record.events = in.events;
  for (std::size_t i = 0; i < selected.size(); ++i)
    out.record.channels.push_back({selected[i]->name, std::vector<float>(z.samples[i].begin(), z.samples[i].end())});
  const std::size_t n = out.record.channels.empty() ? 0 : out.record.channels.front().samples.size();
  out.record.duration_s = static_cast<double>(n) / out.record.sample_rate_hz;
  out.mean = std::move(z.mean);
  out.stddev = std::move(z.stddev);
  out.flagged = std::move(z.flagged);
  return out;
}

inline SignalRecord preprocess_record(const SignalRecord& in, const PipelineConfig& cfg = {}) {
  return preprocess_record_with_stats(in, cfg).record;
}

}  // namespace arousal::dsp
