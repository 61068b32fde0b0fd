#pragma once

// The four experiments:
//   FM  all five channels, fresh weights, everything trainable, train1/eval1
//   SE  EEG-C3 only, fresh weights, everything trainable, train2/eval2
//   PT  EEG-C3 only, FM weights with new input layers, input layers trainable
//   FT  EEG-C3 only, FM weights with new input layers, everything trainable
// All are tested on test2.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "arousal/dsp/preprocess.hpp"
#include "arousal/loss/loss.hpp"
#include "arousal/model/config.hpp"
#include "arousal/model/detection_model.hpp"
#include "arousal/nn/optim.hpp"
#include "arousal/synthdata/partition.hpp"
#include "arousal/synthdata/record.hpp"
#include "arousal/training/trainer.hpp"

namespace arousal {

enum class Experiment { kFM, kSE, kPT, kFT };

inline constexpr std::array<Experiment, 4> kAllExperiments{Experiment::kFM, Experiment::kSE, Experiment::kPT,
                                                           Experiment::kFT};

inline std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::kFM: return "FM";
    case Experiment::kSE: return "SE";
    case Experiment::kPT: return "PT";
    case Experiment::kFT: return "FT";
  }
  return "?";
}

inline Experiment parse_experiment(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  for (auto e : kAllExperiments)
    if (experiment_name(e) == s) return e;
  throw UsageError("unknown experiment '" + s + "' (expected fm, se, pt or ft)");
}

struct ExperimentSpec {
  Experiment name = Experiment::kFM;
  std::vector<std::string> channels;
  bool from_source = false;  // starts from the FM checkpoint
  TrainablePolicy policy = TrainablePolicy::kAll;
  std::string train_split, eval_split, test_split;
};

inline ExperimentSpec spec_for(Experiment e) {
  const std::vector<std::string> all(kCanonicalChannels.begin(), kCanonicalChannels.end());
  const std::vector<std::string> single{std::string(kSingleEegChannel)};
  switch (e) {
    case Experiment::kFM: return {e, all, false, TrainablePolicy::kAll, subset::kTrain1, subset::kEval1, subset::kTest2};
    case Experiment::kSE: return {e, single, false, TrainablePolicy::kAll, subset::kTrain2, subset::kEval2, subset::kTest2};
    case Experiment::kPT:
      return {e, single, true, TrainablePolicy::kInputLayersOnly, subset::kTrain2, subset::kEval2, subset::kTest2};
    case Experiment::kFT: return {e, single, true, TrainablePolicy::kAll, subset::kTrain2, subset::kEval2, subset::kTest2};
  }
  throw UsageError("unknown experiment");
}

inline void to_json(nlohmann::json& j, const ExperimentSpec& s) {
  j = {{"name", experiment_name(s.name)},
       {"channels", s.channels},
       {"init", s.from_source ? "from_checkpoint" : "fresh"},
       {"trainable", s.policy == TrainablePolicy::kAll ? "all" : "input_layers_only"},
       {"train_split", s.train_split},
       {"eval_split", s.eval_split},
       {"test_split", s.test_split}};
}

// Settings shared by every experiment. Per-experiment seeds are derived from
// `seed` and the experiment index.
struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  LossConfig loss;
  nn::OptimizerConfig optimizer;
  dsp::PipelineConfig pipeline;
  std::uint64_t seed = 1;

  std::uint64_t init_seed(Experiment e) const { return derive_seed(seed, 0x696e6974, static_cast<std::uint64_t>(e)); }
  std::uint64_t train_seed(Experiment e) const { return derive_seed(seed, 0x74726e, static_cast<std::uint64_t>(e)); }
};

inline void validate(const ExperimentConfig& c) {
  validate(c.model);
  validate(c.train);
  validate(c.loss);
  nn::validate(c.optimizer);
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"model", c.model},
       {"train", c.train},
       {"loss", c.loss},
       {"optimizer", c.optimizer},
       {"pipeline",
        {{"target_rate_hz", c.pipeline.resample.target_rate_hz},
         {"kaiser_beta", c.pipeline.resample.kaiser_beta},
         {"taps_per_phase", c.pipeline.resample.taps_per_phase},
         {"eeg_eog_order", c.pipeline.eeg_eog_order},
         {"eeg_eog_low_hz", c.pipeline.eeg_eog_low_hz},
         {"eeg_eog_high_hz", c.pipeline.eeg_eog_high_hz},
         {"emg_order", c.pipeline.emg_order},
         {"emg_cutoff_hz", c.pipeline.emg_cutoff_hz}}},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  try {
    if (j.contains("model")) j.at("model").get_to(c.model);
    if (j.contains("train")) j.at("train").get_to(c.train);
    if (j.contains("loss")) j.at("loss").get_to(c.loss);
    if (j.contains("optimizer")) j.at("optimizer").get_to(c.optimizer);
    if (j.contains("pipeline")) {
      const auto& p = j.at("pipeline");
      c.pipeline.resample.target_rate_hz = p.value("target_rate_hz", c.pipeline.resample.target_rate_hz);
      c.pipeline.resample.kaiser_beta = p.value("kaiser_beta", c.pipeline.resample.kaiser_beta);
      c.pipeline.resample.taps_per_phase = p.value("taps_per_phase", c.pipeline.resample.taps_per_phase);
      c.pipeline.eeg_eog_order = p.value("eeg_eog_order", c.pipeline.eeg_eog_order);
      c.pipeline.eeg_eog_low_hz = p.value("eeg_eog_low_hz", c.pipeline.eeg_eog_low_hz);
      c.pipeline.eeg_eog_high_hz = p.value("eeg_eog_high_hz", c.pipeline.eeg_eog_high_hz);
      c.pipeline.emg_order = p.value("emg_order", c.pipeline.emg_order);
      c.pipeline.emg_cutoff_hz = p.value("emg_cutoff_hz", c.pipeline.emg_cutoff_hz);
    }
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("experiment config: ") + ex.what());
  }
}

}  // namespace arousal
