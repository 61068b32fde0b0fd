#pragma once

// Group comparison across experiments: Kruskal-Wallis omnibus per metric,
// then pairwise Mann-Whitney U tests with Bonferroni adjustment.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "arousal/evalstats/metrics.hpp"
#include "arousal/evalstats/rank_tests.hpp"

namespace arousal {

inline constexpr double kSignificance = 0.05;
inline constexpr Metric kReportedMetrics[] = {Metric::kF1, Metric::kPrecision, Metric::kRecall};

struct PairwiseTest {
  std::string a, b;
  double u = 0.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  bool exact = false;
};

struct MetricComparison {
  Metric metric = Metric::kF1;
  KruskalWallis omnibus;
  // Pairwise results are always reported; they are interpreted (and marked)
  // only when the omnibus test is significant.
  bool posthoc = false;
  std::vector<PairwiseTest> pairs;

  std::string marker(const PairwiseTest& t) const { return posthoc ? significance_marker(t.p_adjusted) : "ns"; }
};

struct GroupComparison {
  std::vector<std::string> groups;
  std::vector<MetricComparison> metrics;
};

// `results` maps a group label to per-record metrics. Every group must cover
// the same records; undefined records are dropped.
inline GroupComparison compare_experiments(const std::vector<std::pair<std::string, std::vector<RecordMetrics>>>& results) {
  if (results.size() < 2) throw UsageError("compare_experiments needs at least 2 groups");
  auto ids = [](const std::vector<RecordMetrics>& rs) {
    std::vector<std::pair<std::string, bool>> out;
    for (const auto& r : rs) out.emplace_back(r.record_id, r.defined);
    std::sort(out.begin(), out.end());
    return out;
  };
  const auto ref = ids(results.front().second);
  for (const auto& [name, rs] : results)
    if (ids(rs) != ref)
      throw AlignmentError("experiment '" + name + "' was evaluated on a different record set than '" +
                           results.front().first + "'");

  GroupComparison out;
  for (const auto& r : results) out.groups.push_back(r.first);
  for (Metric metric : kReportedMetrics) {
    MetricComparison mc;
    mc.metric = metric;
    std::vector<std::vector<double>> values;
    for (const auto& [name, rs] : results) {
      auto sorted = rs;
      std::sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) { return x.record_id < y.record_id; });
      values.push_back(defined_values(sorted, metric));
    }
    const bool usable = !values.front().empty() && values.front().size() * values.size() >= 3;
    if (usable) mc.omnibus = kruskal_wallis(values);
    mc.omnibus.df = values.size() - 1;
    mc.posthoc = usable && mc.omnibus.p < kSignificance;
    if (!values.front().empty()) {
      std::vector<double> raw;
      for (std::size_t i = 0; i < values.size(); ++i)
        for (std::size_t j = i + 1; j < values.size(); ++j) {
          const auto t = mann_whitney_u(values[i], values[j]);
          mc.pairs.push_back({out.groups[i], out.groups[j], t.u, t.p, 1.0, t.exact});
          raw.push_back(t.p);
        }
      const auto adj = bonferroni(raw);
      for (std::size_t k = 0; k < adj.size(); ++k) mc.pairs[k].p_adjusted = adj[k];
    }
    out.metrics.push_back(std::move(mc));
  }
  return out;
}

}  // namespace arousal
