#pragma once

// The detection network:
//
//   x [N,1,C,T]
//   mix      conv (C,1), C maps, ReLU                    -> [N, C, 1, T]
//   conv k   conv (1,c) stride (1,s), f0*2^k maps, BN, ReLU  (k = 1..k_max)
//                                                        -> [N, f', 1, T']
//   rec      bidirectional GRU, f' hidden                -> [N, f', 2, T']
//   pool     average over anchor_pool steps              -> [N, f', 2, T'']
//   clf      conv (2,1), (K+1)*N_d maps, softmax over K+1 -> p [N, N_d*T'', K+1]
//   loc      conv (2,1), 2*N_d maps, linear              -> y [N, N_d*T'', 2]
//
// Temporal convolutions pad c-1 samples (floor half on the left) so each
// block divides the length by exactly s.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "arousal/core/rng.hpp"
#include "arousal/model/config.hpp"
#include "arousal/nn/checkpoint.hpp"
#include "arousal/nn/gru.hpp"
#include "arousal/nn/ops.hpp"
#include "arousal/nn/optim.hpp"

namespace arousal {

template <class S>
struct NetworkOutput {
  nn::Tensor<S> p;  // [N, anchors, K+1]
  nn::Tensor<S> y;  // [N, anchors, 2]: (centre offset, log duration ratio)
};

enum class TrainablePolicy { kAll, kInputLayersOnly };

template <class S>
class DetectionModel {
 public:
  DetectionModel() = default;

  static DetectionModel build(const ModelConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    DetectionModel m;
    m.cfg_ = cfg;
    m.create_parameters();
    m.init_all(seed);
    return m;
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  const std::string& provenance() const noexcept { return provenance_; }
  void set_provenance(std::string p) { provenance_ = std::move(p); }

  // Test hook: replace the recurrent block with identity on both directions.
  void set_bypass_recurrent(bool on) noexcept { bypass_rec_ = on; }

  std::vector<nn::Parameter<S>*> parameters() {
    std::vector<nn::Parameter<S>*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }
  std::vector<const nn::Parameter<S>*> parameters() const {
    std::vector<const nn::Parameter<S>*> out;
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }

  nn::Parameter<S>& param(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("model has no parameter '" + name + "'");
    return *params_[it->second];
  }
  const nn::Parameter<S>& param(const std::string& name) const {
    return const_cast<DetectionModel*>(this)->param(name);
  }

  nn::BatchNormState<S>& bn_state(std::size_t block) { return bn_.at(block - 1); }
  const nn::BatchNormState<S>& bn_state(std::size_t block) const { return bn_.at(block - 1); }

  // Parameters that input-layer surgery replaces.
  static bool is_input_layer(const std::string& name) {
    return name.starts_with("mix.") || name.starts_with("conv1.");
  }

  void set_trainable(TrainablePolicy policy) {
    for (auto& p : params_) p->set_frozen(policy == TrainablePolicy::kInputLayersOnly && !is_input_layer(p->name));
  }

  std::size_t trainable_parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_)
      if (!p->frozen) n += p->value.numel();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->value.zero_grad();
  }

  NetworkOutput<S> forward(const nn::Tensor<S>& x, nn::Mode mode) {
    if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != cfg_.channels || x.dim(3) != cfg_.segment_samples)
      throw ShapeError("model input must be [N, 1, " + std::to_string(cfg_.channels) + ", " +
                       std::to_string(cfg_.segment_samples) + "], got " + nn::to_string(x.shape()));
    return forward_any_length(x, mode);
  }

  // Accepts any length that is a multiple of config().granularity(); used
  // for whole-record inference.
  NetworkOutput<S> forward_any_length(const nn::Tensor<S>& x, nn::Mode mode) {
    if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != cfg_.channels)
      throw ShapeError("model input must be [N, 1, " + std::to_string(cfg_.channels) + ", T], got " +
                       nn::to_string(x.shape()));
    const std::size_t n = x.dim(0), t = x.dim(3);
    if (t == 0 || t % cfg_.granularity() != 0)
      throw ShapeError("input length " + std::to_string(t) + " is not a multiple of " +
                       std::to_string(cfg_.granularity()));

    auto h = nn::relu(nn::conv2d(x, param("mix.weight").value, param("mix.bias").value));
    const std::size_t pad = cfg_.kernel - 1;
    const nn::Conv2dGeometry geo{1, cfg_.stride, 0, 0, pad / 2, pad - pad / 2};
    for (std::size_t k = 1; k <= cfg_.conv_blocks; ++k) {
      const auto pre = "conv" + std::to_string(k);
      h = nn::conv2d(h, param(pre + ".weight").value, param(pre + ".bias").value, geo);
      auto& gamma = param(pre + ".bn.gamma");
      const auto bn_mode = (mode == nn::Mode::kTrain && !gamma.frozen) ? nn::Mode::kTrain : nn::Mode::kEval;
      h = nn::relu(nn::batchnorm(h, gamma.value, param(pre + ".bn.beta").value, bn_[k - 1], bn_mode));
    }
    const std::size_t f = cfg_.features(), tr = t / cfg_.decimation(), ta = tr / cfg_.anchor_pool;
    auto seq = nn::reshape(h, {n, f, tr});
    nn::Tensor<S> rec;
    if (bypass_rec_) {
      rec = nn::repeat_direction(seq);
    } else {
      rec = nn::bigru(seq, gru("rec.fwd"), gru("rec.bwd"));
    }
    auto pooled = nn::avgpool1d(rec, cfg_.anchor_pool, cfg_.anchor_pool);  // [N, f', 2, T'']

    const std::size_t nd = cfg_.windows, kc = cfg_.classes + 1;
    auto logits = nn::conv2d(pooled, param("clf.weight").value, param("clf.bias").value);  // [N, kc*nd, 1, T'']
    logits = nn::permute(nn::reshape(logits, {n, nd, kc, ta}), {0, 1, 3, 2});
    auto p = nn::softmax(nn::reshape(logits, {n, nd * ta, kc}), 2);
    auto loc = nn::conv2d(pooled, param("loc.weight").value, param("loc.bias").value);  // [N, 2*nd, 1, T'']
    loc = nn::permute(nn::reshape(loc, {n, nd, 2, ta}), {0, 1, 3, 2});
    auto y = nn::reshape(loc, {n, nd * ta, 2});
    return {std::move(p), std::move(y)};
  }

  // ------------------------------------------------------------ persistence

  nn::Checkpoint to_checkpoint() const {
    nn::Checkpoint ck;
    ck.meta["config"] = cfg_;
    ck.meta["provenance"] = provenance_;
    for (const auto& p : params_)
      ck.entries.push_back({p->name, false, p->value.shape(), p->frozen,
                            std::vector<float>(p->value.data().begin(), p->value.data().end())});
    nlohmann::json bn = nlohmann::json::array();
    for (std::size_t k = 0; k < bn_.size(); ++k) {
      const auto pre = "conv" + std::to_string(k + 1) + ".bn.";
      const auto& st = bn_[k];
      ck.entries.push_back({pre + "running_mean", true, {st.running_mean.size()}, true,
                            std::vector<float>(st.running_mean.begin(), st.running_mean.end())});
      ck.entries.push_back({pre + "running_var", true, {st.running_var.size()}, true,
                            std::vector<float>(st.running_var.begin(), st.running_var.end())});
      bn.push_back({{"batches_tracked", st.batches_tracked}, {"stats_set", st.stats_set}});
    }
    ck.meta["batchnorm"] = bn;
    ck.meta["model_id"] = fingerprint(ck);
    return ck;
  }

  static DetectionModel from_checkpoint(const nn::Checkpoint& ck) {
    ModelConfig cfg;
    try {
      ck.meta.at("config").get_to(cfg);
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(std::string("checkpoint has no usable model config: ") + ex.what(), 0);
    }
    auto m = build(cfg, 0);
    m.provenance_ = ck.meta.value("provenance", std::string{});
    for (auto& p : m.params_) {
      const auto* e = ck.find(p->name);
      if (!e) throw ParseError("checkpoint lacks parameter '" + p->name + "'", 0);
      if (e->shape != p->value.shape())
        throw ShapeError("checkpoint parameter '" + p->name + "' has shape " + nn::to_string(e->shape) + ", model expects " +
                         nn::to_string(p->value.shape()));
      std::copy(e->values.begin(), e->values.end(), p->value.data().begin());
      p->set_frozen(e->frozen);
    }
    const auto& bn = ck.meta.at("batchnorm");
    for (std::size_t k = 0; k < m.bn_.size(); ++k) {
      const auto pre = "conv" + std::to_string(k + 1) + ".bn.";
      auto& st = m.bn_[k];
      const auto* mean = ck.find(pre + "running_mean");
      const auto* var = ck.find(pre + "running_var");
      if (!mean || !var) throw ParseError("checkpoint lacks running statistics for block " + std::to_string(k + 1), 0);
      st.running_mean.assign(mean->values.begin(), mean->values.end());
      st.running_var.assign(var->values.begin(), var->values.end());
      st.batches_tracked = bn.at(k).at("batches_tracked").get<std::size_t>();
      st.stats_set = bn.at(k).at("stats_set").get<bool>();
    }
    return m;
  }

  // Independent deep copy.
  DetectionModel clone() const { return from_checkpoint(to_checkpoint()); }

  std::string id() const { return to_checkpoint().meta.at("model_id").template get<std::string>(); }

  // FNV-1a over every stored float bit pattern, in entry order.
  static std::string fingerprint(const nn::Checkpoint& ck) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xFF;
        h *= 0x100000001b3ULL;
      }
    };
    for (const auto& e : ck.entries)
      if (!e.buffer)
        for (float v : e.values) mix(std::bit_cast<std::uint32_t>(v));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  // Re-creates mix and conv1 (with its batch norm and running statistics)
  // for `new_channels` inputs; every other tensor is copied unchanged.
  DetectionModel replace_input_layers(std::size_t new_channels, std::uint64_t seed) const {
    if (new_channels == 0) throw ConfigError("surgery: new channel count must be positive");
    ModelConfig cfg = cfg_;
    cfg.channels = new_channels;
    auto out = build(cfg, seed);
    for (const auto& p : params_) {
      if (is_input_layer(p->name)) continue;
      auto& dst = out.param(p->name);
      std::copy(p->value.data().begin(), p->value.data().end(), dst.value.data().begin());
    }
    for (std::size_t k = 1; k < bn_.size(); ++k) out.bn_[k] = bn_[k];
    out.provenance_ = id();
    return out;
  }

 private:
  void add(const std::string& name, nn::Shape shape) {
    index_[name] = params_.size();
    params_.push_back(std::make_unique<nn::Parameter<S>>(name, nn::Tensor<S>::zeros(std::move(shape))));
  }

  void create_parameters() {
    const auto c = cfg_.channels;
    add("mix.weight", {c, 1, c, 1});
    add("mix.bias", {c});
    std::size_t in = c;
    for (std::size_t k = 1; k <= cfg_.conv_blocks; ++k) {
      const auto pre = "conv" + std::to_string(k);
      const auto out = cfg_.maps(k);
      add(pre + ".weight", {out, in, 1, cfg_.kernel});
      add(pre + ".bias", {out});
      add(pre + ".bn.gamma", {out});
      add(pre + ".bn.beta", {out});
      bn_.emplace_back(out);
      in = out;
    }
    const auto f = cfg_.features();
    for (const char* dir : {"rec.fwd", "rec.bwd"}) {
      add(std::string(dir) + ".w_ih", {3 * f, f});
      add(std::string(dir) + ".w_hh", {3 * f, f});
      add(std::string(dir) + ".bias", {3 * f});
    }
    const auto kc = cfg_.classes + 1, nd = cfg_.windows;
    add("clf.weight", {kc * nd, f, 2, 1});
    add("clf.bias", {kc * nd});
    add("loc.weight", {2 * nd, f, 2, 1});
    add("loc.bias", {2 * nd});
  }

  static std::size_t fan_in(const std::string& name, const nn::Shape& s, std::size_t gru_hidden) {
    if (name.find(".bn.") != std::string::npos) return 0;
    if (name.starts_with("rec.")) return gru_hidden;
    if (s.size() == 4) return s[1] * s[2] * s[3];
    return 0;  // biases: fan-in of their sibling weight, resolved by caller
  }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) in parameter order; BN gamma 1, beta 0.
  void init_all(std::uint64_t seed) {
    Rng rng(seed);
    std::size_t last_fan = 1;
    for (auto& p : params_) {
      auto data = p->value.data();
      if (p->name.ends_with(".bn.gamma")) {
        std::fill(data.begin(), data.end(), S{1});
        continue;
      }
      if (p->name.ends_with(".bn.beta")) {
        std::fill(data.begin(), data.end(), S{0});
        continue;
      }
      std::size_t fan = fan_in(p->name, p->value.shape(), cfg_.features());
      if (fan == 0) fan = last_fan;
      last_fan = fan;
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
      for (auto& v : data) v = static_cast<S>(rng.uniform(-bound, bound));
    }
  }

  nn::GruWeights<S> gru(const std::string& pre) {
    return {param(pre + ".w_ih").value, param(pre + ".w_hh").value, param(pre + ".bias").value};
  }

  ModelConfig cfg_;
  std::vector<std::unique_ptr<nn::Parameter<S>>> params_;
  std::map<std::string, std::size_t> index_;
  std::vector<nn::BatchNormState<S>> bn_;
  std::string provenance_;
  bool bypass_rec_ = false;
};

}  // namespace arousal
