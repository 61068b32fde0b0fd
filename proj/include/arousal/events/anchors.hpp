#pragma once

// Default event windows ("anchors") and the mapping between truth intervals
// and per-anchor training targets.
//
// Localization encoding for a window w and event e:
//   y0 = (centre(e) - centre(w)) / dur(w)
//   y1 = ln(dur(e) / dur(w))

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "arousal/core/error.hpp"
#include "arousal/events/interval.hpp"
#include "arousal/synthdata/record.hpp"

namespace arousal {

inline constexpr double kDefaultWindowS = 15.0;
inline constexpr double kDefaultOverlap = 0.5;

struct Anchor {
  double start_s = 0.0;
  double duration_s = 0.0;

  double centre_s() const noexcept { return start_s + 0.5 * duration_s; }
  bool operator==(const Anchor&) const = default;
};

struct AnchorGrid {
  double segment_duration_s = 0.0;
  double window_duration_s = kDefaultWindowS;
  double overlap = kDefaultOverlap;
  std::vector<Anchor> anchors;

  std::size_t size() const noexcept { return anchors.size(); }
  double step_s() const noexcept { return window_duration_s * (1.0 - overlap); }
};

inline AnchorGrid build_anchor_grid(double segment_duration_s, double window_duration_s = kDefaultWindowS,
                                    double overlap = kDefaultOverlap) {
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("anchor overlap must lie in [0, 1)");
  if (!(window_duration_s > 0.0)) throw ConfigError("anchor window duration must be positive");
  if (window_duration_s > segment_duration_s)
    throw ConfigError("anchor window (" + std::to_string(window_duration_s) + " s) exceeds the segment (" +
                      std::to_string(segment_duration_s) + " s)");
  AnchorGrid g{segment_duration_s, window_duration_s, overlap, {}};
  const double step = g.step_s();
  // Integer stepping keeps starts exact multiples of the step.
  for (std::size_t k = 0;; ++k) {
    const double start = static_cast<double>(k) * step;
    if (start >= segment_duration_s - 1e-9 * segment_duration_s) break;
    g.anchors.push_back({start, window_duration_s});
  }
  return g;
}

inline std::array<double, 2> encode(const Anchor& a, double start_s, double duration_s) {
  const double centre = start_s + 0.5 * duration_s;
  return {(centre - a.centre_s()) / a.duration_s, std::log(duration_s / a.duration_s)};
}

inline Anchor decode_box(const Anchor& a, double y0, double y1) {
  const double dur = a.duration_s * std::exp(y1);
  const double centre = a.centre_s() + y0 * a.duration_s;
  return {centre - 0.5 * dur, dur};
}

struct MatchResult {
  std::vector<std::size_t> positive;           // anchor indices, ascending
  std::vector<std::size_t> negative;           // anchor indices, ascending
  std::vector<std::array<double, 2>> targets;  // aligned with `positive`
  std::vector<std::size_t> truth_index;        // aligned with `positive`

  std::size_t n_pos() const noexcept { return positive.size(); }
  std::size_t n_neg() const noexcept { return negative.size(); }
};

inline constexpr double kPositiveIou = 0.5;

// Every truth claims its highest-IOU anchor (ties: earlier anchor). Every
// other anchor with IOU > 0.5 to some truth is positive for its best truth
// (ties: earlier truth). When two truths claim the same anchor the higher
// IOU wins (ties: earlier truth).
inline MatchResult assign_targets(const AnchorGrid& grid, std::span<const EventInterval> truth) {
  const std::size_t na = grid.size(), nt = truth.size();
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(na, kNone);
  std::vector<double> owner_iou(na, 0.0);
  std::vector<bool> forced(na, false);

  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t t = 0; t < nt; ++t) {
      const double v = iou(grid.anchors[a], truth[t]);
      if (v > kPositiveIou && v > owner_iou[a]) {
        owner[a] = t;
        owner_iou[a] = v;
      }
    }
  for (std::size_t t = 0; t < nt; ++t) {
    std::size_t best = kNone;
    double best_iou = 0.0;
    for (std::size_t a = 0; a < na; ++a) {
      const double v = iou(grid.anchors[a], truth[t]);
      if (v > best_iou) {
        best = a;
        best_iou = v;
      }
    }
    if (best == kNone) continue;
    if (!forced[best] || best_iou > owner_iou[best]) {
      owner[best] = t;
      owner_iou[best] = best_iou;
      forced[best] = true;
    }
  }

  MatchResult m;
  for (std::size_t a = 0; a < na; ++a) {
    if (owner[a] == kNone) {
      m.negative.push_back(a);
      continue;
    }
    const auto& e = truth[owner[a]];
    m.positive.push_back(a);
    m.truth_index.push_back(owner[a]);
    m.targets.push_back(encode(grid.anchors[a], e.start_s, e.duration_s));
  }
  return m;
}

// Turns per-anchor outputs into events. `p_event[i]` is the arousal-class
// probability and `y[2i], y[2i+1]` the localization output of anchor i.
// Events are clamped to [0, segment] and shifted by `offset_s`.
template <class S>
std::vector<ScoredEvent> decode(std::span<const S> p_event, std::span<const S> y, const AnchorGrid& grid, double tau,
                                double offset_s = 0.0) {
  if (p_event.size() != grid.size() || y.size() != 2 * grid.size())
    throw ShapeError("decode: expected " + std::to_string(grid.size()) + " anchors, got " +
                     std::to_string(p_event.size()) + " probabilities and " + std::to_string(y.size()) +
                     " localization values");
  std::vector<ScoredEvent> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double prob = p_event[i];
    if (prob < tau) continue;
    const auto box = decode_box(grid.anchors[i], y[2 * i], y[2 * i + 1]);
    const double lo = std::max(0.0, box.start_s);
    const double hi = std::min(grid.segment_duration_s, box.start_s + box.duration_s);
    if (!(hi > lo)) continue;
    out.push_back({offset_s + lo, hi - lo, prob, kArousalLabel});
  }
  return out;
}

}  // namespace arousal
