#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "arousal/events/detection.hpp"

namespace arousal {

struct RecordMetrics {
  std::string record_id;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool defined = true;  // false when the record has no truth events

  bool operator==(const RecordMetrics&) const = default;
};

// Precision is 0 when nothing is detected but truth exists; F1 is 0 when
// precision and recall are both 0.
inline RecordMetrics metrics_from_counts(std::string record_id, std::size_t tp, std::size_t fp, std::size_t fn) {
  RecordMetrics m{std::move(record_id), tp, fp, fn};
  if (tp + fn == 0) {
    m.defined = false;
    return m;
  }
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double s = m.precision + m.recall;
  m.f1 = s > 0.0 ? 2.0 * m.precision * m.recall / s : 0.0;
  return m;
}

template <TimeInterval T>
RecordMetrics record_metrics(std::string record_id, const std::vector<ScoredEvent>& detected,
                             const std::vector<T>& truth, double iou_threshold = kMatchIou) {
  const auto m = match_evaluation(detected, truth, iou_threshold);
  return metrics_from_counts(std::move(record_id), m.tp, m.fp, m.fn);
}

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample (N-1); 0 when N < 2
  std::size_t n = 0;
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  s.n = v.size();
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

enum class Metric { kF1, kPrecision, kRecall };

inline const char* metric_name(Metric m) {
  switch (m) {
    case Metric::kF1: return "f1";
    case Metric::kPrecision: return "precision";
    case Metric::kRecall: return "recall";
  }
  return "?";
}

inline double metric_value(const RecordMetrics& r, Metric m) {
  switch (m) {
    case Metric::kF1: return r.f1;
    case Metric::kPrecision: return r.precision;
    case Metric::kRecall: return r.recall;
  }
  return 0.0;
}

// Values of the defined records only, in input order.
inline std::vector<double> defined_values(const std::vector<RecordMetrics>& rs, Metric m) {
  std::vector<double> out;
  for (const auto& r : rs)
    if (r.defined) out.push_back(metric_value(r, m));
  return out;
}

inline double mean_f1(const std::vector<RecordMetrics>& rs) { return summarize(defined_values(rs, Metric::kF1)).mean; }

}  // namespace arousal
