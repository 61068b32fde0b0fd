#pragma once

// Running one experiment end to end: data preparation, optional input-layer
// surgery on the FM checkpoint, training, threshold selection, and the run
// directory.
//
// Run directory <runs_root>/<fm|se|pt|ft>/:
//   checkpoint.ckpt  best model (by validation loss)
//   metrics.csv      step,loc,pos,neg,total,val_total
//   threshold.json   selected threshold and the full sweep
//   run.json         experiment spec, configuration, seeds, provenance

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "arousal/core/version.hpp"
#include "arousal/experiments/experiment.hpp"
#include "arousal/synthdata/dataset.hpp"
#include "arousal/training/inference.hpp"
#include "arousal/training/trainer.hpp"

namespace arousal {

inline constexpr const char* kRunsRootEnv = "AROUSAL_RUNS";

inline std::filesystem::path default_runs_root() {
  if (const char* env = std::getenv(kRunsRootEnv); env && *env) return env;
  return "runs";
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

struct RunPaths {
  std::filesystem::path dir;

  std::filesystem::path checkpoint() const { return dir / "checkpoint.ckpt"; }
  std::filesystem::path metrics() const { return dir / "metrics.csv"; }
  std::filesystem::path threshold() const { return dir / "threshold.json"; }
  std::filesystem::path run_json() const { return dir / "run.json"; }
};

inline RunPaths run_paths(const std::filesystem::path& runs_root, Experiment e) {
  return {runs_root / lower(experiment_name(e))};
}

// Loads one record restricted to the given channels.
using RecordLoader = std::function<SignalRecord(const std::string& id, const std::vector<std::string>& channels)>;

inline RecordLoader dataset_loader(const Dataset& ds) {
  return [&ds](const std::string& id, const std::vector<std::string>& channels) { return ds.load(id, channels); };
}

inline std::vector<SignalRecord> prepare_records(const std::vector<std::string>& ids,
                                                 const std::vector<std::string>& channels,
                                                 const dsp::PipelineConfig& pipeline, const RecordLoader& loader) {
  auto cfg = pipeline;
  cfg.channels = channels;
  std::vector<SignalRecord> out;
  for (const auto& id : ids) out.push_back(dsp::preprocess_record(loader(id, channels), cfg));
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("missing '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError("malformed '" + path.string() + "': " + ex.what(), 0);
  }
}

struct RunResult {
  ExperimentSpec spec;
  RunPaths paths;
  TrainOutcome outcome;
  ThresholdSweep sweep;
  std::string model_id;
  std::size_t trainable_parameters = 0;
};

template <class S = float>
DetectionModel<S> initial_model(const ExperimentSpec& spec, const ExperimentConfig& cfg,
                                 const std::filesystem::path& runs_root, std::string* source_id = nullptr) {
  if (!spec.from_source) {
    auto mc = cfg.model;
    mc.channels = spec.channels.size();
    return DetectionModel<S>::build(mc, cfg.init_seed(spec.name));
  }
  const auto src = run_paths(runs_root, Experiment::kFM).checkpoint();
  if (!std::filesystem::exists(src))
    throw DependencyError("experiment " + experiment_name(spec.name) + " needs the FM checkpoint at '" + src.string() +
                          "'; run `train --experiment fm` first");
  const auto fm = DetectionModel<S>::from_checkpoint(nn::load_checkpoint(src.string()));
  auto model = fm.replace_input_layers(spec.channels.size(), cfg.init_seed(spec.name));
  model.set_trainable(spec.policy);
  if (source_id) *source_id = model.provenance();
  return model;
}

inline RunResult run_experiment(Experiment e, const Dataset& ds, const ExperimentConfig& cfg,
                                const std::filesystem::path& runs_root, const RecordLoader& loader,
                                std::ostream* progress = nullptr) {
  validate(cfg);
  RunResult res;
  res.spec = spec_for(e);
  res.paths = run_paths(runs_root, e);

  std::string source_id;
  auto model = initial_model<float>(res.spec, cfg, runs_root, &source_id);
  res.trainable_parameters = model.trainable_parameter_count();

  const auto train_records = prepare_records(ds.subset(res.spec.train_split), res.spec.channels, cfg.pipeline, loader);
  const auto eval_records = prepare_records(ds.subset(res.spec.eval_split), res.spec.channels, cfg.pipeline, loader);

  auto tcfg = cfg.train;
  tcfg.rng_seed = cfg.train_seed(e);
  const auto name = experiment_name(e);
  TrainObserver observer;
  if (progress)
    observer = [&](const MetricsRow& r) {
      if (r.val_total)
        *progress << name << " step " << r.step << " loss " << r.loss.total << " val " << *r.val_total << std::endl;
    };
  res.outcome = train(model, train_records, eval_records, tcfg, cfg.loss, cfg.optimizer, observer);

  auto best = DetectionModel<float>::from_checkpoint(res.outcome.best);
  res.model_id = best.id();
  std::vector<RecordScores> scores;
  for (const auto& r : eval_records)
    scores.push_back(score_record(best, r, tcfg.window_duration_s, tcfg.window_overlap));
  res.sweep = select_threshold(scores, tcfg.threshold_grid);

  std::filesystem::create_directories(res.paths.dir);
  nn::save_checkpoint(res.paths.checkpoint().string(), res.outcome.best);
  write_text(res.paths.metrics(), res.outcome.metrics_csv());
  write_text(res.paths.threshold(),
             nlohmann::json{{"tau", res.sweep.tau}, {"grid", res.sweep.grid}, {"mean_f1", res.sweep.mean_f1}}.dump(2) +
                 "\n");
  nlohmann::json run = {{"experiment", res.spec},
                        {"config", cfg},
                        {"seeds", {{"base", cfg.seed}, {"init", cfg.init_seed(e)}, {"train", tcfg.rng_seed}}},
                        {"version", kVersion},
                        {"dataset", {{"generator", ds.generator()}, {"partition", ds.partition_spec()}}},
                        {"source_checkpoint", source_id.empty() ? nlohmann::json(nullptr) : nlohmann::json(source_id)},
                        {"model_id", res.model_id},
                        {"trainable_parameters", res.trainable_parameters},
                        {"best_step", res.outcome.best_step},
                        {"best_val_loss", res.outcome.best_val_loss},
                        {"steps_run", res.outcome.steps_run},
                        {"stopped_early", res.outcome.stopped_early},
                        {"threshold", res.sweep.tau}};
  write_text(res.paths.run_json(), run.dump(2) + "\n");
  return res;
}

}  // namespace arousal
