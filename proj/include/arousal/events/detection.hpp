#pragma once

// Non-maximum suppression and one-to-one matching of detections to truth.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "arousal/events/interval.hpp"
#include "arousal/synthdata/record.hpp"

namespace arousal {

inline constexpr double kNmsIou = 0.5;
inline constexpr double kMatchIou = 0.5;

// Greedy NMS: visit by probability descending (ties: earlier start, then
// input order); keep an event iff its IOU with every kept event is below
// the threshold. Output is in visiting order.
inline std::vector<ScoredEvent> nms(std::span<const ScoredEvent> events, double iou_threshold = kNmsIou) {
  std::vector<std::size_t> order(events.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (events[a].probability != events[b].probability) return events[a].probability > events[b].probability;
    return events[a].start_s < events[b].start_s;
  });
  std::vector<ScoredEvent> kept;
  for (std::size_t i : order) {
    const bool clear = std::all_of(kept.begin(), kept.end(),
                                   [&](const ScoredEvent& k) { return iou(k, events[i]) < iou_threshold; });
    if (clear) kept.push_back(events[i]);
  }
  return kept;
}

struct MatchedPair {
  std::size_t detection = 0;
  std::size_t truth = 0;
  double iou = 0.0;
  bool operator==(const MatchedPair&) const = default;
};

struct EvaluationMatch {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<MatchedPair> pairs;  // sorted by detection index
};

namespace detail {

// Kuhn's augmenting-path search from detection d.
inline bool augment(std::size_t d, const std::vector<std::vector<std::size_t>>& adj, std::vector<bool>& seen,
                    std::vector<std::size_t>& truth_of, std::vector<std::size_t>& det_of) {
  for (std::size_t t : adj[d]) {
    if (seen[t]) continue;
    seen[t] = true;
    if (det_of[t] == static_cast<std::size_t>(-1) || augment(det_of[t], adj, seen, truth_of, det_of)) {
      det_of[t] = d;
      truth_of[d] = t;
      return true;
    }
  }
  return false;
}

}  // namespace detail

// Candidate pairs have IOU >= threshold. Pairs are taken greedily by IOU
// descending (ties: higher detection probability, then earlier truth); the
// greedy matching is then grown along augmenting paths until it has maximum
// cardinality, so no greedy pair is dropped unless a larger matching needs it.
template <TimeInterval T>
EvaluationMatch match_evaluation(std::span<const ScoredEvent> detected, std::span<const T> truth,
                                 double iou_threshold = kMatchIou) {
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  struct Cand {
    std::size_t d, t;
    double v;
  };
  std::vector<Cand> cands;
  std::vector<std::vector<std::size_t>> adj(detected.size());
  for (std::size_t d = 0; d < detected.size(); ++d)
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const double v = iou(detected[d], truth[t]);
      if (v >= iou_threshold && v > 0.0) {
        cands.push_back({d, t, v});
        adj[d].push_back(t);
      }
    }
  std::stable_sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
    if (a.v != b.v) return a.v > b.v;
    if (detected[a.d].probability != detected[b.d].probability)
      return detected[a.d].probability > detected[b.d].probability;
    return a.t < b.t;
  });
  std::vector<std::size_t> truth_of(detected.size(), kNone), det_of(truth.size(), kNone);
  for (const auto& c : cands)
    if (truth_of[c.d] == kNone && det_of[c.t] == kNone) {
      truth_of[c.d] = c.t;
      det_of[c.t] = c.d;
    }
  for (std::size_t d = 0; d < detected.size(); ++d) {
    if (truth_of[d] != kNone) continue;
    std::vector<bool> seen(truth.size(), false);
    detail::augment(d, adj, seen, truth_of, det_of);
  }

  EvaluationMatch m;
  for (std::size_t d = 0; d < detected.size(); ++d)
    if (truth_of[d] != kNone) m.pairs.push_back({d, truth_of[d], iou(detected[d], truth[truth_of[d]])});
  m.tp = m.pairs.size();
  m.fp = detected.size() - m.tp;
  m.fn = truth.size() - m.tp;
  return m;
}

template <TimeInterval T>
EvaluationMatch match_evaluation(const std::vector<ScoredEvent>& detected, const std::vector<T>& truth,
                                 double iou_threshold = kMatchIou) {
  return match_evaluation(std::span<const ScoredEvent>(detected), std::span<const T>(truth), iou_threshold);
}

}  // namespace arousal
