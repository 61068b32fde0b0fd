#pragma once

// Training loop with a fixed validation set, best-checkpoint retention and
// patience-based early stopping.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "arousal/events/anchors.hpp"
#include "arousal/loss/loss.hpp"
#include "arousal/model/detection_model.hpp"
#include "arousal/nn/optim.hpp"
#include "arousal/training/segments.hpp"

namespace arousal {

struct TrainConfig {
  std::size_t batch_size = 8;
  std::size_t max_steps = 5000;
  std::size_t eval_every = 100;
  std::size_t patience = 10;
  double segment_duration_s = 120.0;
  double window_duration_s = kDefaultWindowS;
  double window_overlap = kDefaultOverlap;
  std::size_t validation_segments = 32;
  std::vector<double> threshold_grid = default_threshold_grid();
  std::uint64_t rng_seed = 1;

  static std::vector<double> default_threshold_grid() {
    std::vector<double> g;
    for (int k = 1; k <= 19; ++k) g.push_back(0.05 * k);
    return g;
  }
};

inline void validate(const TrainConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError("train." + m); };
  if (c.batch_size == 0) fail("batch_size must be positive");
  if (c.max_steps == 0) fail("max_steps must be positive");
  if (c.eval_every == 0) fail("eval_every must be positive");
  if (c.patience == 0) fail("patience must be at least 1");
  if (!(c.segment_duration_s > 0.0)) fail("segment_duration_s must be positive");
  if (c.validation_segments == 0) fail("validation_segments must be positive");
  if (c.threshold_grid.empty()) fail("threshold_grid must not be empty");
  for (std::size_t i = 0; i < c.threshold_grid.size(); ++i) {
    const double t = c.threshold_grid[i];
    if (!(t > 0.0 && t < 1.0)) fail("threshold_grid values must lie in (0, 1)");
    if (i > 0 && !(t > c.threshold_grid[i - 1])) fail("threshold_grid must be strictly increasing");
  }
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size},
       {"max_steps", c.max_steps},
       {"eval_every", c.eval_every},
       {"patience", c.patience},
       {"segment_duration_s", c.segment_duration_s},
       {"window_duration_s", c.window_duration_s},
       {"window_overlap", c.window_overlap},
       {"validation_segments", c.validation_segments},
       {"threshold_grid", c.threshold_grid},
       {"rng_seed", c.rng_seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.patience = j.value("patience", c.patience);
    c.segment_duration_s = j.value("segment_duration_s", c.segment_duration_s);
    c.window_duration_s = j.value("window_duration_s", c.window_duration_s);
    c.window_overlap = j.value("window_overlap", c.window_overlap);
    c.validation_segments = j.value("validation_segments", c.validation_segments);
    c.threshold_grid = j.value("threshold_grid", c.threshold_grid);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("train: ") + ex.what());
  }
}

// Anchor grid for one training segment; must agree with the model's anchors.
inline AnchorGrid segment_grid(const ModelConfig& model, const TrainConfig& cfg, double sample_rate_hz) {
  auto grid = build_anchor_grid(cfg.segment_duration_s, cfg.window_duration_s, cfg.window_overlap);
  const double spacing = static_cast<double>(model.anchor_pool * model.decimation()) / sample_rate_hz;
  if (grid.size() != model.anchors() || std::abs(grid.step_s() - spacing) > 1e-9)
    throw ConfigError("anchor grid (" + std::to_string(grid.size()) + " windows every " + std::to_string(grid.step_s()) +
                      " s) does not match the model (" + std::to_string(model.anchors()) + " anchors every " +
                      std::to_string(spacing) + " s)");
  if (std::llround(cfg.segment_duration_s * sample_rate_hz) != static_cast<long long>(model.segment_samples))
    throw ConfigError("segment of " + std::to_string(cfg.segment_duration_s) + " s at " +
                      std::to_string(sample_rate_hz) + " Hz does not match model input length " +
                      std::to_string(model.segment_samples));
  return grid;
}

struct MetricsRow {
  std::size_t step = 0;
  LossBreakdown loss;
  std::optional<double> val_total;
};

inline std::string metrics_csv_header() { return "step,loc,pos,neg,total,val_total\n"; }

inline std::string format_metrics_row(const MetricsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,", r.step, r.loss.loc, r.loss.pos, r.loss.neg, r.loss.total);
  std::string s = buf;
  if (r.val_total) {
    std::snprintf(buf, sizeof buf, "%.9g", *r.val_total);
    s += buf;
  }
  return s + "\n";
}

struct TrainOutcome {
  nn::Checkpoint best;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t best_step = 0;
  std::size_t steps_run = 0;
  bool stopped_early = false;
  std::vector<MetricsRow> log;

  std::string metrics_csv() const {
    std::string s = metrics_csv_header();
    for (const auto& r : log) s += format_metrics_row(r);
    return s;
  }
};

// Fixed validation placements drawn from their own seeded stream.
inline std::vector<SegmentPlacement> validation_placements(const std::vector<SignalRecord>& records,
                                                           const TrainConfig& cfg) {
  Rng rng(derive_seed(cfg.rng_seed, 0x7661));
  std::vector<SegmentPlacement> out;
  for (std::size_t i = 0; i < cfg.validation_segments; ++i)
    out.push_back(draw_placement(records, cfg.segment_duration_s, rng));
  return out;
}

template <class S>
double validation_loss(DetectionModel<S>& model, const std::vector<SignalRecord>& records,
                       const std::vector<SegmentPlacement>& placements, const AnchorGrid& grid, const TrainConfig& cfg,
                       const LossConfig& loss_cfg) {
  double sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t at = 0; at < placements.size(); at += cfg.batch_size) {
    const std::vector<SegmentPlacement> chunk(
        placements.begin() + static_cast<std::ptrdiff_t>(at),
        placements.begin() + static_cast<std::ptrdiff_t>(std::min(placements.size(), at + cfg.batch_size)));
    auto batch = assemble_batch(records, chunk, cfg.segment_duration_s);
    std::vector<MatchResult> matches;
    for (const auto& t : batch.truth) matches.push_back(assign_targets(grid, t));
    const auto out = model.forward(batch.x.template cast<S>(), nn::Mode::kEval);
    sum += total_loss(out.p, out.y, matches, loss_cfg).parts.total;
    ++batches;
  }
  return sum / static_cast<double>(batches);
}

// Called after each step with the row just logged.
using TrainObserver = std::function<void(const MetricsRow&)>;

template <class S>
TrainOutcome train(DetectionModel<S>& model, const std::vector<SignalRecord>& train_records,
                   const std::vector<SignalRecord>& val_records, const TrainConfig& cfg, const LossConfig& loss_cfg,
                   const nn::OptimizerConfig& opt_cfg, const TrainObserver& observer = {}) {
  validate(cfg);
  validate(loss_cfg);
  nn::validate(opt_cfg);
  if (train_records.empty()) throw UsageError("train: no training records");
  if (val_records.empty()) throw UsageError("train: no validation records");
  for (const auto* set : {&train_records, &val_records})
    for (const auto& r : *set)
      if (r.channels.size() != model.config().channels)
        throw ShapeError("record '" + r.record_id + "' has " + std::to_string(r.channels.size()) +
                         " channels, model expects " + std::to_string(model.config().channels));
  const auto grid = segment_grid(model.config(), cfg, train_records.front().sample_rate_hz);
  const auto val_set = validation_placements(val_records, cfg);

  Rng rng(derive_seed(cfg.rng_seed, 0x7472));
  nn::AdamState<S> adam;
  auto params = model.parameters();
  TrainOutcome out;
  std::size_t evals_since_best = 0;

  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    std::vector<SegmentPlacement> placements;
    for (std::size_t b = 0; b < cfg.batch_size; ++b)
      placements.push_back(draw_placement(train_records, cfg.segment_duration_s, rng));
    auto batch = assemble_batch(train_records, placements, cfg.segment_duration_s);
    std::vector<MatchResult> matches;
    for (const auto& t : batch.truth) matches.push_back(assign_targets(grid, t));

    model.zero_grad();
    const auto net = model.forward(batch.x.template cast<S>(), nn::Mode::kTrain);
    auto loss = total_loss(net.p, net.y, matches, loss_cfg);
    MetricsRow row{step, loss.parts, std::nullopt};
    if (!std::isfinite(loss.parts.total)) {
      nlohmann::json dump = {{"step", step},
                             {"loc", loss.parts.loc},
                             {"pos", loss.parts.pos},
                             {"neg", loss.parts.neg},
                             {"total", loss.parts.total}};
      nlohmann::json norms;
      for (const auto* p : params) {
        double ss = 0.0;
        for (S v : p->value.data()) ss += static_cast<double>(v) * v;
        norms[p->name] = std::sqrt(ss);
      }
      dump["parameter_norms"] = norms;
      throw DivergenceError("non-finite loss at step " + std::to_string(step) + ": " + dump.dump());
    }
    nn::backward(loss.total);
    nn::adam_step<S>(params, adam, opt_cfg, static_cast<long>(step));
    out.steps_run = step;

    const bool last = step == cfg.max_steps;
    if (step % cfg.eval_every == 0 || last) {
      const double val = validation_loss(model, val_records, val_set, grid, cfg, loss_cfg);
      row.val_total = val;
      if (val < out.best_val_loss) {
        out.best_val_loss = val;
        out.best_step = step;
        out.best = model.to_checkpoint();
        evals_since_best = 0;
      } else if (++evals_since_best >= cfg.patience) {
        out.stopped_early = !last;
      }
    }
    out.log.push_back(row);
    if (observer) observer(row);
    if (out.stopped_early) break;
  }
  if (out.best.entries.empty()) out.best = model.to_checkpoint();
  return out;
}

}  // namespace arousal
