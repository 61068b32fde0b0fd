#pragma once

// Three-part detection loss: total = loc + pos + neg.
//
//   loc = (1/N+) sum_{i in pos} sum_j huber(y_ij - t_ij)
//   pos = (1/N+) sum_{i in pos} focal(p_i[event])
//   neg = (1/N-) sum_{i in neg} focal(p_i[background])
//
// Positives and negatives are pooled over the whole batch. An empty set
// contributes 0.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "arousal/core/error.hpp"
#include "arousal/events/anchors.hpp"
#include "arousal/nn/ops.hpp"

namespace arousal {

inline constexpr double kProbabilityFloor = 1e-12;

struct LossConfig {
  double alpha = 0.25;
  double gamma = 2.0;
};

inline void validate(const LossConfig& c) {
  if (!(c.alpha > 0.0 && c.alpha <= 1.0)) throw ConfigError("loss.alpha must lie in (0, 1]");
  if (!(c.gamma >= 0.0)) throw ConfigError("loss.gamma must be non-negative");
}

inline void to_json(nlohmann::json& j, const LossConfig& c) { j = {{"alpha", c.alpha}, {"gamma", c.gamma}}; }
inline void from_json(const nlohmann::json& j, LossConfig& c) {
  c.alpha = j.value("alpha", c.alpha);
  c.gamma = j.value("gamma", c.gamma);
}

struct LossBreakdown {
  double loc = 0.0;
  double pos = 0.0;
  double neg = 0.0;
  double total = 0.0;
};

inline double huber(double u) noexcept {
  const double a = std::abs(u);
  return a < 1.0 ? 0.5 * u * u : a - 0.5;
}

inline double huber_grad(double u) noexcept {
  if (std::abs(u) < 1.0) return u;
  return u > 0.0 ? 1.0 : -1.0;
}

// -alpha (1-p)^gamma log p, with p clamped below at 1e-12.
inline double focal_term(double p, const LossConfig& cfg) noexcept {
  const double q = std::max(p, kProbabilityFloor);
  return -cfg.alpha * std::pow(1.0 - q, cfg.gamma) * std::log(q);
}

inline double focal_grad(double p, const LossConfig& cfg) noexcept {
  if (p < kProbabilityFloor) return 0.0;
  const double one_minus = 1.0 - p;
  double g = -cfg.alpha * std::pow(one_minus, cfg.gamma) / p;
  if (cfg.gamma != 0.0 && one_minus > 0.0) g += cfg.alpha * cfg.gamma * std::pow(one_minus, cfg.gamma - 1.0) * std::log(p);
  return g;
}

// Mean Huber loss (summed over both coordinates) over positive anchors of
// one segment. `y` holds two values per anchor.
inline double localization_loss(std::span<const double> y, const MatchResult& m) {
  if (m.positive.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t k = 0; k < m.positive.size(); ++k)
    for (std::size_t j = 0; j < 2; ++j) s += huber(y[2 * m.positive[k] + j] - m.targets[k][j]);
  return s / static_cast<double>(m.positive.size());
}

// (pos, neg) for one segment. `p` holds K+1 = 2 probabilities per anchor,
// background first.
inline std::pair<double, double> classification_losses(std::span<const double> p, const MatchResult& m,
                                                       const LossConfig& cfg) {
  double lp = 0.0, ln = 0.0;
  for (std::size_t i : m.positive) lp += focal_term(p[2 * i + kArousalLabel], cfg);
  for (std::size_t i : m.negative) ln += focal_term(p[2 * i], cfg);
  if (!m.positive.empty()) lp /= static_cast<double>(m.positive.size());
  if (!m.negative.empty()) ln /= static_cast<double>(m.negative.size());
  return {lp, ln};
}

template <class S>
struct LossResult {
  nn::Tensor<S> total;  // scalar, differentiable
  LossBreakdown parts;
};

// Fused loss over a batch. p: [N, A, 2] probabilities, y: [N, A, 2];
// matches[n] describes segment n.
template <class S>
LossResult<S> total_loss(const nn::Tensor<S>& p, const nn::Tensor<S>& y, const std::vector<MatchResult>& matches,
                         const LossConfig& cfg) {
  if (p.rank() != 3 || p.dim(2) != 2 || y.shape() != p.shape())
    throw ShapeError("total_loss: expected p and y of shape [N, A, 2], got " + nn::to_string(p.shape()) + " and " +
                     nn::to_string(y.shape()));
  const std::size_t n = p.dim(0), a = p.dim(1);
  if (matches.size() != n)
    throw ShapeError("total_loss: " + std::to_string(matches.size()) + " matches for a batch of " + std::to_string(n));
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& m : matches) {
    if (m.positive.size() + m.negative.size() != a)
      throw ShapeError("total_loss: match covers " + std::to_string(m.positive.size() + m.negative.size()) +
                       " anchors, model emits " + std::to_string(a));
    n_pos += m.n_pos();
    n_neg += m.n_neg();
  }
  const double inv_pos = n_pos ? 1.0 / static_cast<double>(n_pos) : 0.0;
  const double inv_neg = n_neg ? 1.0 / static_cast<double>(n_neg) : 0.0;

  const auto pd = p.data();
  const auto yd = y.data();
  LossBreakdown parts;
  for (std::size_t b = 0; b < n; ++b) {
    const auto& m = matches[b];
    const std::size_t base = b * a * 2;
    for (std::size_t k = 0; k < m.positive.size(); ++k) {
      const std::size_t i = base + 2 * m.positive[k];
      parts.loc += huber(yd[i] - m.targets[k][0]) + huber(yd[i + 1] - m.targets[k][1]);
      parts.pos += focal_term(pd[i + kArousalLabel], cfg);
    }
    for (std::size_t i : m.negative) parts.neg += focal_term(pd[base + 2 * i], cfg);
  }
  parts.loc *= inv_pos;
  parts.pos *= inv_pos;
  parts.neg *= inv_neg;
  parts.total = parts.loc + parts.pos + parts.neg;

  auto out = nn::make_result<S>({}, {&p, &y});
  out.data()[0] = static_cast<S>(parts.total);
  if (out.requires_grad()) {
    out.node().backward_fn = [matches, cfg, a, inv_pos, inv_neg](nn::Node<S>& self) {
      const double g = self.grad[0];
      auto& pn = *self.parents[0];
      auto& yn = *self.parents[1];
      std::vector<S> gp(pn.data.size(), S{0}), gy(yn.data.size(), S{0});
      for (std::size_t b = 0; b < matches.size(); ++b) {
        const auto& m = matches[b];
        const std::size_t base = b * a * 2;
        for (std::size_t k = 0; k < m.positive.size(); ++k) {
          const std::size_t i = base + 2 * m.positive[k];
          gy[i] = static_cast<S>(g * inv_pos * huber_grad(yn.data[i] - m.targets[k][0]));
          gy[i + 1] = static_cast<S>(g * inv_pos * huber_grad(yn.data[i + 1] - m.targets[k][1]));
          gp[i + kArousalLabel] = static_cast<S>(g * inv_pos * focal_grad(pn.data[i + kArousalLabel], cfg));
        }
        for (std::size_t i : m.negative)
          gp[base + 2 * i] = static_cast<S>(g * inv_neg * focal_grad(pn.data[base + 2 * i], cfg));
      }
      nn::detail::accumulate<S>(pn, gp);
      nn::detail::accumulate<S>(yn, gy);
    };
  }
  return {std::move(out), parts};
}

}  // namespace arousal
