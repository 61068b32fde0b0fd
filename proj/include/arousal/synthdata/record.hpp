#pragma once

#include <array>
#include <cmath>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "arousal/core/error.hpp"

namespace arousal {

inline constexpr std::array<std::string_view, 5> kCanonicalChannels{"EEG-C3", "EEG-C4", "EOG-L",
                                                                    "EOG-R", "EMG-chin"};
inline constexpr std::string_view kSingleEegChannel = "EEG-C3";

// Arousals are the only event class (K = 1); label 0 is reserved for background.
inline constexpr int kArousalLabel = 1;

struct EventInterval {
  double start_s = 0.0;
  double duration_s = 0.0;
  int label = kArousalLabel;

  double end_s() const noexcept { return start_s + duration_s; }
  bool operator==(const EventInterval&) const = default;
};

struct Channel {
  std::string name;
  std::vector<float> samples;

  bool operator==(const Channel&) const = default;
};

struct SignalRecord {
  std::string record_id;
  double sample_rate_hz = 0.0;
  double duration_s = 0.0;
  std::vector<Channel> channels;
  std::vector<EventInterval> events;

  std::size_t expected_samples() const noexcept {
    return static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
  }

  const Channel* find(std::string_view name) const noexcept {
    for (const auto& c : channels)
      if (c.name == name) return &c;
    return nullptr;
  }

  bool operator==(const SignalRecord&) const = default;
};

// Throws ValidationError describing the first violated invariant.
inline void validate(const SignalRecord& r) {
  if (!(r.sample_rate_hz > 0.0) || !std::isfinite(r.sample_rate_hz))
    throw ValidationError("record '" + r.record_id + "': sample rate must be positive");
  if (!(r.duration_s > 0.0) || !std::isfinite(r.duration_s))
    throw ValidationError("record '" + r.record_id + "': duration must be positive");
  const auto n = r.expected_samples();
  std::set<std::string> names;
  for (const auto& c : r.channels) {
    if (!names.insert(c.name).second)
      throw ValidationError("record '" + r.record_id + "': duplicate channel '" + c.name + "'");
    if (c.samples.size() != n)
      throw ValidationError("record '" + r.record_id + "': channel '" + c.name + "' has " +
                            std::to_string(c.samples.size()) + " samples, expected " +
                            std::to_string(n));
  }
  for (const auto& e : r.events) {
    if (!(e.duration_s > 0.0))
      throw ValidationError("record '" + r.record_id + "': event with non-positive duration");
    if (e.start_s < 0.0 || e.end_s() > r.duration_s + 1e-9)
      throw ValidationError("record '" + r.record_id + "': event [" + std::to_string(e.start_s) +
                            ", " + std::to_string(e.end_s()) + "] outside record duration " +
                            std::to_string(r.duration_s));
    if (e.label != kArousalLabel)
      throw ValidationError("record '" + r.record_id + "': unknown event label " +
                            std::to_string(e.label));
  }
}

}  // namespace arousal
