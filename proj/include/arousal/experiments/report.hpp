#pragma once

// Test-set evaluation of completed runs and the comparison report.
//
// Output directory:
//   report.json         machine-readable results
//   report.csv          experiment,metric,mean,std,n
//   report.txt          formatted tables
//   events_<exp>.txt    detections, one line per event

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "arousal/evalstats/comparison.hpp"
#include "arousal/events/event_io.hpp"
#include "arousal/experiments/runner.hpp"

namespace arousal {

struct ExperimentEvaluation {
  ExperimentSpec spec;
  double tau = 0.5;
  std::vector<RecordMetrics> records;
  std::vector<RecordEvent> events;

  Summary summary(Metric m) const { return summarize(defined_values(records, m)); }
};

struct Report {
  std::vector<ExperimentEvaluation> experiments;
  GroupComparison comparison;  // over SE, FT, PT
  std::size_t records = 0;
  std::size_t excluded = 0;  // records without truth events

  const ExperimentEvaluation& find(Experiment e) const {
    for (const auto& x : experiments)
      if (x.spec.name == e) return x;
    throw UsageError("report has no " + experiment_name(e) + " row");
  }
};

inline ExperimentEvaluation evaluate_run(Experiment e, const Dataset& ds, const std::filesystem::path& runs_root,
                                         const RecordLoader& loader) {
  const auto paths = run_paths(runs_root, e);
  if (!std::filesystem::exists(paths.checkpoint()))
    throw DependencyError("no completed " + experiment_name(e) + " run in '" + paths.dir.string() +
                          "'; run `train --experiment " + lower(experiment_name(e)) + "` first");
  const auto run = read_json(paths.run_json());
  ExperimentConfig cfg;
  run.at("config").get_to(cfg);
  ExperimentEvaluation ev;
  ev.spec = spec_for(e);
  ev.tau = read_json(paths.threshold()).at("tau").get<double>();
  auto model = DetectionModel<float>::from_checkpoint(nn::load_checkpoint(paths.checkpoint().string()));
  const auto records = prepare_records(ds.subset(ev.spec.test_split), ev.spec.channels, cfg.pipeline, loader);
  for (const auto& r : records) {
    const auto scores = score_record(model, r, cfg.train.window_duration_s, cfg.train.window_overlap);
    const auto detected = detect(scores, ev.tau);
    ev.records.push_back(record_metrics(r.record_id, detected, r.events));
    for (const auto& d : detected) ev.events.push_back({r.record_id, d});
  }
  return ev;
}

inline Report build_report(std::vector<ExperimentEvaluation> evaluations) {
  Report rep;
  rep.experiments = std::move(evaluations);
  if (!rep.experiments.empty()) {
    rep.records = rep.experiments.front().records.size();
    for (const auto& r : rep.experiments.front().records) rep.excluded += r.defined ? 0 : 1;
  }
  std::vector<std::pair<std::string, std::vector<RecordMetrics>>> groups;
  for (Experiment e : {Experiment::kSE, Experiment::kFT, Experiment::kPT})
    for (const auto& x : rep.experiments)
      if (x.spec.name == e) groups.emplace_back(experiment_name(e), x.records);
  if (groups.size() >= 2) rep.comparison = compare_experiments(groups);
  return rep;
}

inline Report evaluate_experiments(const Dataset& ds, const std::filesystem::path& runs_root, const RecordLoader& loader) {
  std::vector<ExperimentEvaluation> evs;
  for (Experiment e : kAllExperiments) evs.push_back(evaluate_run(e, ds, runs_root, loader));
  return build_report(std::move(evs));
}

inline std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string pvalue(double p) {
  char buf[64];
  std::snprintf(buf, sizeof buf, p < 1e-4 ? "%.3e" : "%.5f", p);
  return buf;
}

inline nlohmann::json report_json(const Report& rep) {
  nlohmann::json j;
  j["records"] = rep.records;
  j["excluded_records"] = rep.excluded;
  j["experiments"] = nlohmann::json::array();
  for (const auto& ev : rep.experiments) {
    nlohmann::json x = {{"name", experiment_name(ev.spec.name)}, {"threshold", ev.tau}};
    for (Metric m : kReportedMetrics) {
      const auto s = ev.summary(m);
      x["summary"][metric_name(m)] = {{"mean", s.mean}, {"std", s.stddev}, {"n", s.n}};
    }
    for (const auto& r : ev.records) {
      nlohmann::json rr = {{"record_id", r.record_id}, {"tp", r.tp}, {"fp", r.fp}, {"fn", r.fn}, {"defined", r.defined}};
      if (r.defined) {
        rr["precision"] = r.precision;
        rr["recall"] = r.recall;
        rr["f1"] = r.f1;
      }
      x["records"].push_back(rr);
    }
    j["experiments"].push_back(x);
  }
  nlohmann::json cmp = nlohmann::json::array();
  for (const auto& mc : rep.comparison.metrics) {
    nlohmann::json c = {{"metric", metric_name(mc.metric)},
                        {"groups", rep.comparison.groups},
                        {"kruskal_wallis", {{"H", mc.omnibus.h}, {"p", mc.omnibus.p}, {"df", mc.omnibus.df}}},
                        {"posthoc", mc.posthoc},
                        {"pairs", nlohmann::json::array()}};
    for (const auto& t : mc.pairs)
      c["pairs"].push_back({{"a", t.a},
                            {"b", t.b},
                            {"U", t.u},
                            {"p_raw", t.p_raw},
                            {"p_adjusted", t.p_adjusted},
                            {"exact", t.exact},
                            {"marker", mc.marker(t)}});
    cmp.push_back(c);
  }
  j["comparison"] = cmp;
  return j;
}

inline std::string report_csv(const Report& rep) {
  std::string s = "experiment,metric,mean,std,n\n";
  for (const auto& ev : rep.experiments)
    for (Metric m : kReportedMetrics) {
      const auto x = ev.summary(m);
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%zu\n", experiment_name(ev.spec.name).c_str(), metric_name(m),
                    x.mean, x.stddev, x.n);
      s += buf;
    }
  return s;
}

inline std::string report_text(const Report& rep) {
  std::ostringstream os;
  os << "Test-set detection performance (mean ± std over records)\n";
  os << rep.records << " records, " << rep.excluded << " excluded for having no scored events\n\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-4s  %-6s  %-15s  %-15s  %-15s\n", "", "tau", "F1", "Precision", "Recall");
  os << buf;
  for (const auto& ev : rep.experiments) {
    auto cell = [&](Metric m) {
      const auto s = ev.summary(m);
      return fixed(s.mean) + " ± " + fixed(s.stddev);
    };
    std::snprintf(buf, sizeof buf, "%-4s  %-6s  %-15s  %-15s  %-15s\n", experiment_name(ev.spec.name).c_str(),
                  fixed(ev.tau, 2).c_str(), cell(Metric::kF1).c_str(), cell(Metric::kPrecision).c_str(),
                  cell(Metric::kRecall).c_str());
    os << buf;
  }
  if (!rep.comparison.metrics.empty()) {
    os << "\nGroup comparison (Kruskal-Wallis; pairwise Mann-Whitney U, Bonferroni-adjusted)\n";
    for (const auto& mc : rep.comparison.metrics) {
      os << "\n" << metric_name(mc.metric) << ": H = " << fixed(mc.omnibus.h, 4) << ", p = " << pvalue(mc.omnibus.p)
         << (mc.posthoc ? "" : " (not significant; pairwise results not interpreted)") << "\n";
      for (const auto& t : mc.pairs) {
        std::snprintf(buf, sizeof buf, "  %s/%s  U = %-8s p = %-10s p_adj = %-10s %s\n", t.a.c_str(), t.b.c_str(),
                      fixed(t.u, 1).c_str(), pvalue(t.p_raw).c_str(), pvalue(t.p_adjusted).c_str(),
                      mc.marker(t).c_str());
        os << buf;
      }
    }
  }
  return os.str();
}

inline void write_report(const Report& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", report_json(rep).dump(2) + "\n");
  write_text(dir / "report.csv", report_csv(rep));
  write_text(dir / "report.txt", report_text(rep));
  for (const auto& ev : rep.experiments)
    write_text(dir / ("events_" + lower(experiment_name(ev.spec.name)) + ".txt"), format_event_list(ev.events));
}

}  // namespace arousal
