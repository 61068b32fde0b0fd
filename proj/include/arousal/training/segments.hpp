#pragma once

// Event-centred segment sampling. A segment is placed so that at least half
// of one randomly chosen event lies inside it: with event midpoint m (in
// samples) and segment length L, the start S is drawn uniformly from the
// integers in [max(0, m - L), min(R - L, m)].

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "arousal/core/error.hpp"
#include "arousal/core/rng.hpp"
#include "arousal/nn/tensor.hpp"
#include "arousal/synthdata/record.hpp"

namespace arousal {

struct SegmentPlacement {
  std::size_t record = 0;  // index into the record list
  std::size_t start = 0;   // first sample
};

inline std::size_t segment_samples(const SignalRecord& r, double segment_duration_s) {
  return static_cast<std::size_t>(std::llround(segment_duration_s * r.sample_rate_hz));
}

inline std::size_t record_samples(const SignalRecord& r) {
  return r.channels.empty() ? 0 : r.channels.front().samples.size();
}

// Start sample for a segment of `record`.
inline std::size_t place_segment(const SignalRecord& record, double segment_duration_s, Rng& rng) {
  const std::size_t len = segment_samples(record, segment_duration_s);
  const std::size_t total = record_samples(record);
  if (len == 0 || len > total)
    throw SamplingError("segment of " + std::to_string(segment_duration_s) + " s does not fit record '" +
                        record.record_id + "' (" + std::to_string(static_cast<double>(total) / record.sample_rate_hz) +
                        " s)");
  const std::size_t last = total - len;
  if (record.events.empty()) return static_cast<std::size_t>(rng.below(last + 1));
  const auto& e = record.events[rng.below(record.events.size())];
  const double mid = (e.start_s + 0.5 * e.duration_s) * record.sample_rate_hz;
  const double lo_real = std::max(0.0, mid - static_cast<double>(len));
  const double hi_real = std::min(static_cast<double>(last), mid);
  const auto lo = static_cast<std::size_t>(std::ceil(lo_real));
  const auto hi = static_cast<std::size_t>(std::floor(hi_real));
  if (hi < lo) throw SamplingError("no feasible segment placement for an event of record '" + record.record_id + "'");
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

// Events overlapping [start, start + len), clipped and shifted to segment time.
inline std::vector<EventInterval> segment_truth(const SignalRecord& record, std::size_t start, std::size_t len) {
  const double t0 = static_cast<double>(start) / record.sample_rate_hz;
  const double t1 = static_cast<double>(start + len) / record.sample_rate_hz;
  std::vector<EventInterval> out;
  for (const auto& e : record.events) {
    const double lo = std::max(t0, e.start_s), hi = std::min(t1, e.end_s());
    if (hi > lo) out.push_back({lo - t0, hi - lo, e.label});
  }
  return out;
}

struct SampledSegment {
  std::size_t start = 0;
  double start_s = 0.0;
  std::vector<float> data;  // channel-major, C x L
  std::vector<EventInterval> truth;
};

inline void copy_segment(const SignalRecord& record, std::size_t start, std::size_t len, float* dst) {
  for (const auto& c : record.channels) {
    std::copy_n(c.samples.begin() + static_cast<std::ptrdiff_t>(start), len, dst);
    dst += len;
  }
}

inline SampledSegment sample_segment(const SignalRecord& record, double segment_duration_s, Rng& rng) {
  const std::size_t len = segment_samples(record, segment_duration_s);
  SampledSegment s;
  s.start = place_segment(record, segment_duration_s, rng);
  s.start_s = static_cast<double>(s.start) / record.sample_rate_hz;
  s.data.resize(record.channels.size() * len);
  copy_segment(record, s.start, len, s.data.data());
  s.truth = segment_truth(record, s.start, len);
  return s;
}

struct Batch {
  nn::Tensor<float> x;  // [N, 1, C, L]
  std::vector<std::vector<EventInterval>> truth;
};

inline Batch assemble_batch(const std::vector<SignalRecord>& records, const std::vector<SegmentPlacement>& placements,
                            double segment_duration_s) {
  if (placements.empty()) throw UsageError("assemble_batch: empty batch");
  const auto& first = records.at(placements.front().record);
  const std::size_t c = first.channels.size(), len = segment_samples(first, segment_duration_s);
  Batch b;
  b.x = nn::Tensor<float>::zeros({placements.size(), 1, c, len});
  float* dst = b.x.data().data();
  for (const auto& p : placements) {
    const auto& r = records.at(p.record);
    if (r.channels.size() != c) throw ShapeError("assemble_batch: records disagree on channel count");
    copy_segment(r, p.start, len, dst);
    dst += c * len;
    b.truth.push_back(segment_truth(r, p.start, len));
  }
  return b;
}

// A record drawn uniformly, then a segment placed within it.
inline SegmentPlacement draw_placement(const std::vector<SignalRecord>& records, double segment_duration_s, Rng& rng) {
  const auto idx = static_cast<std::size_t>(rng.below(records.size()));
  return {idx, place_segment(records[idx], segment_duration_s, rng)};
}

}  // namespace arousal
