#pragma once

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "arousal/nn/tensor.hpp"

namespace arousal::nn {

// A named trainable tensor. Frozen parameters do not track gradients, so
// backward() leaves their grad absent and adam_step() skips them.
template <class S>
struct Parameter {
  std::string name;
  Tensor<S> value;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Tensor<S> v) : name(std::move(n)), value(std::move(v)) { value.set_requires_grad(true); }

  void set_frozen(bool f) {
    frozen = f;
    value.set_requires_grad(!f);
  }
};

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline void validate(const OptimizerConfig& c) {
  if (!(c.learning_rate > 0.0)) throw ConfigError("optimizer.learning_rate must be positive");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0)) throw ConfigError("optimizer.beta1 must lie in [0, 1)");
  if (!(c.beta2 >= 0.0 && c.beta2 < 1.0)) throw ConfigError("optimizer.beta2 must lie in [0, 1)");
  if (!(c.epsilon > 0.0)) throw ConfigError("optimizer.epsilon must be positive");
}

inline void to_json(nlohmann::json& j, const OptimizerConfig& c) {
  j = {{"learning_rate", c.learning_rate}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"epsilon", c.epsilon}};
}

inline void from_json(const nlohmann::json& j, OptimizerConfig& c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
}

// First and second moments keyed by parameter name.
template <class S>
struct AdamState {
  struct Moments {
    std::vector<S> m, v;
  };
  std::map<std::string, Moments> moments;
};

// Bias-corrected Adam. `step` is the 1-based update count.
template <class S>
void adam_step(std::span<Parameter<S>* const> params, AdamState<S>& state, const OptimizerConfig& cfg, long step) {
  if (step <= 0) throw UsageError("adam_step: step index must be positive, got " + std::to_string(step));
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const S b1 = static_cast<S>(cfg.beta1), b2 = static_cast<S>(cfg.beta2);
  for (Parameter<S>* p : params) {
    if (p->frozen || !p->value.has_grad()) continue;
    auto& mom = state.moments[p->name];
    const auto n = p->value.numel();
    if (mom.m.size() != n) {
      mom.m.assign(n, S{0});
      mom.v.assign(n, S{0});
    }
    auto w = p->value.data();
    auto g = p->value.grad();
    for (std::size_t i = 0; i < n; ++i) {
      mom.m[i] = b1 * mom.m[i] + (S{1} - b1) * g[i];
      mom.v[i] = b2 * mom.v[i] + (S{1} - b2) * g[i] * g[i];
      const double mhat = static_cast<double>(mom.m[i]) / bc1;
      const double vhat = static_cast<double>(mom.v[i]) / bc2;
      w[i] = static_cast<S>(static_cast<double>(w[i]) - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon));
    }
  }
}

template <class S>
void adam_step(std::vector<Parameter<S>*> params, AdamState<S>& state, const OptimizerConfig& cfg, long step) {
  adam_step<S>(std::span<Parameter<S>* const>(params), state, cfg, step);
}

}  // namespace arousal::nn
