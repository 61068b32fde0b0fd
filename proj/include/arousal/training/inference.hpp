#pragma once

// Whole-record inference and detection-threshold selection. A record is
// zero-padded to a multiple of the model's input granularity and passed
// through the network once; the anchor grid then spans the padded length and
// detections are clipped to the true record duration.

#include <cmath>
#include <string>
#include <vector>

#include "arousal/evalstats/metrics.hpp"
#include "arousal/events/anchors.hpp"
#include "arousal/events/detection.hpp"
#include "arousal/model/detection_model.hpp"
#include "arousal/training/segments.hpp"

namespace arousal {

struct RecordScores {
  std::string record_id;
  double duration_s = 0.0;
  AnchorGrid grid;
  std::vector<float> p_event;  // per anchor
  std::vector<float> y;        // two per anchor
  std::vector<EventInterval> truth;
};

template <class S>
RecordScores score_record(DetectionModel<S>& model, const SignalRecord& record, double window_duration_s = kDefaultWindowS,
                          double overlap = kDefaultOverlap) {
  const auto& cfg = model.config();
  if (record.channels.size() != cfg.channels)
    throw ShapeError("record '" + record.record_id + "' has " + std::to_string(record.channels.size()) +
                     " channels, model expects " + std::to_string(cfg.channels));
  const std::size_t n = record_samples(record);
  const std::size_t g = cfg.granularity();
  const std::size_t padded = std::max<std::size_t>(1, (n + g - 1) / g) * g;
  auto x = nn::Tensor<S>::zeros({1, 1, cfg.channels, padded});
  auto xd = x.data();
  for (std::size_t c = 0; c < cfg.channels; ++c)
    std::copy(record.channels[c].samples.begin(), record.channels[c].samples.end(),
              xd.begin() + static_cast<std::ptrdiff_t>(c * padded));
  const auto out = model.forward_any_length(x, nn::Mode::kEval);

  RecordScores rs;
  rs.record_id = record.record_id;
  rs.duration_s = static_cast<double>(n) / record.sample_rate_hz;
  rs.grid = build_anchor_grid(static_cast<double>(padded) / record.sample_rate_hz, window_duration_s, overlap);
  const std::size_t anchors = out.p.dim(1);
  if (rs.grid.size() != anchors)
    throw ConfigError("anchor grid has " + std::to_string(rs.grid.size()) + " windows, model emits " +
                      std::to_string(anchors));
  for (std::size_t i = 0; i < anchors; ++i) {
    rs.p_event.push_back(static_cast<float>(out.p.data()[2 * i + kArousalLabel]));
    rs.y.push_back(static_cast<float>(out.y.data()[2 * i]));
    rs.y.push_back(static_cast<float>(out.y.data()[2 * i + 1]));
  }
  rs.truth = record.events;
  return rs;
}

// Decode at threshold tau, clip to the record, suppress overlaps.
inline std::vector<ScoredEvent> detect(const RecordScores& rs, double tau) {
  auto raw = decode<float>(rs.p_event, rs.y, rs.grid, tau);
  std::vector<ScoredEvent> clipped;
  for (auto e : raw) {
    const double hi = std::min(e.end_s(), rs.duration_s);
    if (!(hi > e.start_s)) continue;
    e.duration_s = hi - e.start_s;
    clipped.push_back(e);
  }
  return nms(clipped);
}

inline std::vector<RecordMetrics> evaluate_scores(const std::vector<RecordScores>& scores, double tau) {
  std::vector<RecordMetrics> out;
  for (const auto& rs : scores) out.push_back(record_metrics(rs.record_id, detect(rs, tau), rs.truth));
  return out;
}

struct ThresholdSweep {
  double tau = 0.5;
  std::vector<double> grid;
  std::vector<double> mean_f1;  // aligned with grid
};

// Maximizes mean per-record F1; ties go to the smaller threshold.
inline ThresholdSweep select_threshold(const std::vector<RecordScores>& scores, const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("threshold grid must not be empty");
  ThresholdSweep s;
  s.grid = grid;
  double best = -1.0;
  for (double tau : grid) {
    const double f1 = mean_f1(evaluate_scores(scores, tau));
    s.mean_f1.push_back(f1);
    if (f1 > best) {
      best = f1;
      s.tau = tau;
    }
  }
  return s;
}

}  // namespace arousal
