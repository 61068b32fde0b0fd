#pragma once

#include <algorithm>
#include <concepts>

namespace arousal {

template <class I>
concept TimeInterval = requires(const I& i) {
  { i.start_s } -> std::convertible_to<double>;
  { i.duration_s } -> std::convertible_to<double>;
};

// A detected event. `label` is the class index (1 = arousal).
struct ScoredEvent {
  double start_s = 0.0;
  double duration_s = 0.0;
  double probability = 0.0;
  int label = 1;

  double end_s() const noexcept { return start_s + duration_s; }
  bool operator==(const ScoredEvent&) const = default;
};

// Intersection over union of two time intervals; 0 when either is empty.
template <TimeInterval A, TimeInterval B>
double iou(const A& a, const B& b) noexcept {
  const double a0 = a.start_s, a1 = a.start_s + a.duration_s;
  const double b0 = b.start_s, b1 = b.start_s + b.duration_s;
  const double inter = std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
  const double uni = (a1 - a0) + (b1 - b0) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace arousal
