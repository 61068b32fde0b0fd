#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "arousal/core/rng.hpp"
#include "arousal/nn/checkpoint.hpp"
#include "arousal/nn/gru.hpp"
#include "arousal/nn/ops.hpp"
#include "arousal/nn/optim.hpp"
#include "arousal/nn/tensor.hpp"
#include "arousal/testing/gradcheck.hpp"
#include "arousal/testing/selftest.hpp"

using namespace arousal;
using namespace arousal::nn;
using T = Tensor<double>;

namespace {

T random(Rng& rng, Shape s) {
  std::vector<double> v(numel_of(s));
  for (auto& x : v) x = rng.normal();
  return T::from(std::move(s), std::move(v));
}

std::vector<double> values(const T& t) { return {t.data().begin(), t.data().end()}; }

GruWeights<double> gru_weights(Rng& rng, std::size_t f, std::size_t h, double scale = 1.0) {
  GruWeights<double> w{random(rng, {3 * h, f}), random(rng, {3 * h, h}), random(rng, {3 * h})};
  for (auto* t : {&w.w_ih, &w.w_hh, &w.bias})
    for (auto& v : t->data()) v *= scale;
  return w;
}

}  // namespace

TEST(Conv2d, HandExample) {
  const auto x = T::from({1, 1, 1, 4}, {1, 2, 3, 4});
  const auto w = T::from({1, 1, 1, 3}, {1, 1, 1});
  const auto y = conv2d(x, w, T::zeros({1}));
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 2}));
  EXPECT_EQ(values(y), (std::vector<double>{6, 9}));
}

TEST(Conv2d, IdentityKernel) {
  Rng rng(1);
  const auto x = random(rng, {2, 1, 3, 5});
  const auto y = conv2d(x, T::full({1, 1, 1, 1}, 1.0), T::zeros({1}));
  EXPECT_EQ(values(y), values(x));
}

TEST(Conv2d, ChannelMixingKernelCollapsesHeight) {
  Rng rng(2);
  const std::size_t c = 5, t = 32;
  const auto y = conv2d(random(rng, {1, 1, c, t}), random(rng, {c, 1, c, 1}), T::zeros({c}));
  EXPECT_EQ(y.shape(), (Shape{1, c, 1, t}));
}

TEST(Conv2d, StrideAndOutputSize) {
  const auto x = T::zeros({1, 1, 1, 9});
  Conv2dGeometry g;
  g.stride_w = 2;
  EXPECT_EQ(conv2d(x, T::zeros({3, 1, 1, 3}), T::zeros({3}), g).shape(), (Shape{1, 3, 1, 4}));
}

TEST(Conv2d, ShapeMismatch) {
  EXPECT_THROW(conv2d(T::zeros({1, 2, 1, 4}), T::zeros({1, 3, 1, 3}), T::zeros({1})), ShapeError);
  EXPECT_THROW(conv2d(T::zeros({1, 1, 1, 2}), T::zeros({1, 1, 1, 3}), T::zeros({1})), ShapeError);
  EXPECT_THROW(conv2d(T::zeros({1, 4}), T::zeros({1, 1, 1, 3}), T::zeros({1})), ShapeError);
}

TEST(BatchNorm, TrainModeNormalizes) {
  BatchNormState<double> st(1);
  const auto y = batchnorm(T::from({3, 1, 1, 1}, {1, 2, 3}), T::full({1}, 1.0), T::zeros({1}), st, Mode::kTrain);
  EXPECT_NEAR(y[0], -1.22474, 1e-4);
  EXPECT_NEAR(y[1], 0.0, 1e-12);
  EXPECT_NEAR(y[2], 1.22474, 1e-4);
  EXPECT_EQ(st.batches_tracked, 1u);
  EXPECT_NEAR(st.running_mean[0], 0.2, 1e-12);
}

TEST(BatchNorm, AffineInversionRestoresInput) {
  Rng rng(3);
  const auto x = random(rng, {4, 2, 1, 6});
  double mu[2] = {0, 0}, var[2] = {0, 0};
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t i = 0; i < 6; ++i) mu[c] += x[(b * 2 + c) * 6 + i] / 24.0;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t i = 0; i < 6; ++i) var[c] += std::pow(x[(b * 2 + c) * 6 + i] - mu[c], 2) / 24.0;
  }
  BatchNormState<double> st(2);
  st.eps = 0.0;
  const auto y = batchnorm(x, T::from({2}, {std::sqrt(var[0]), std::sqrt(var[1])}), T::from({2}, {mu[0], mu[1]}), st,
                           Mode::kTrain);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(y[i], x[i], 1e-12);
}

TEST(BatchNorm, EvalWithUnitStatsIsIdentity) {
  BatchNormState<double> st(1);
  st.set_running_stats({0.0}, {1.0});
  const auto x = T::from({1, 1, 1, 3}, {-2, 0.5, 7});
  const auto y = batchnorm(x, T::full({1}, 1.0), T::zeros({1}), st, Mode::kEval);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(y[i], x[i], 1e-4);
}

TEST(BatchNorm, EvalBeforeStatsIsStateError) {
  BatchNormState<double> st(1);
  EXPECT_THROW(batchnorm(T::zeros({1, 1, 1, 3}), T::full({1}, 1.0), T::zeros({1}), st, Mode::kEval), StateError);
}

TEST(Elementwise, ReluSoftmaxAvgpool) {
  EXPECT_EQ(values(relu(T::from({2}, {-1, 2}))), (std::vector<double>{0, 2}));
  EXPECT_EQ(values(relu(relu(T::from({2}, {-1, 2})))), (std::vector<double>{0, 2}));
  EXPECT_EQ(values(softmax(T::zeros({1, 2}), 1)), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(values(avgpool1d(T::from({1, 1, 4}, {1, 2, 3, 4}), 2, 2)), (std::vector<double>{1.5, 3.5}));
}

TEST(Elementwise, SoftmaxRowsSumToOne) {
  Rng rng(4);
  const auto p = softmax(random(rng, {7, 3}), 1);
  for (std::size_t r = 0; r < 7; ++r) EXPECT_NEAR(p[3 * r] + p[3 * r + 1] + p[3 * r + 2], 1.0, 1e-12);
}

TEST(BiGru, ZeroWeightsGiveZeroOutput) {
  Rng rng(5);
  const GruWeights<double> z{T::zeros({6, 3}), T::zeros({6, 2}), T::zeros({6})};
  const auto y = bigru(random(rng, {2, 3, 5}), z, z);
  EXPECT_EQ(y.shape(), (Shape{2, 2, 2, 5}));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(BiGru, SingleStepDirectionsAgree) {
  Rng rng(6);
  const auto w = gru_weights(rng, 3, 4);
  const auto y = bigru(random(rng, {1, 3, 1}), w, w);
  for (std::size_t h = 0; h < 4; ++h) EXPECT_DOUBLE_EQ(y[h * 2 + 0], y[h * 2 + 1]);
}

TEST(BiGru, TimeReversalSwapsDirections) {
  Rng rng(7);
  const std::size_t f = 3, h = 4, t = 6;
  const auto a = gru_weights(rng, f, h, 0.5), b = gru_weights(rng, f, h, 0.5);
  const auto x = random(rng, {1, f, t});
  auto xr = T::zeros({1, f, t});
  for (std::size_t c = 0; c < f; ++c)
    for (std::size_t s = 0; s < t; ++s) xr[c * t + s] = x[c * t + (t - 1 - s)];
  const auto y = bigru(x, a, b), yr = bigru(xr, b, a);
  for (std::size_t k = 0; k < h; ++k)
    for (std::size_t s = 0; s < t; ++s) {
      EXPECT_NEAR(y[(k * 2 + 0) * t + s], yr[(k * 2 + 1) * t + (t - 1 - s)], 1e-12);
      EXPECT_NEAR(y[(k * 2 + 1) * t + s], yr[(k * 2 + 0) * t + (t - 1 - s)], 1e-12);
    }
}

TEST(Autograd, SumOfProductGradientIsInput) {
  auto w = T::from({3}, {0.5, -1, 2}, true);
  const auto x = T::from({3}, {4, 5, 6});
  auto loss = sum(mul(w, x));
  backward(loss);
  EXPECT_EQ(std::vector<double>(w.grad().begin(), w.grad().end()), values(x));
}

TEST(Autograd, NonScalarLossIsUsageError) {
  auto w = T::from({3}, {1, 2, 3}, true);
  auto y = relu(w);
  EXPECT_THROW(backward(y), UsageError);
}

TEST(Autograd, FrozenParameterHasNoGradient) {
  Parameter<double> a("a", T::from({2}, {1, 2})), b("b", T::from({2}, {3, 4}));
  b.set_frozen(true);
  auto loss = sum(mul(a.value, b.value));
  backward(loss);
  EXPECT_TRUE(a.value.has_grad());
  EXPECT_FALSE(b.value.has_grad());
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter<double> p("p", T::full({4}, 1.0));
  auto loss = sum(p.value);
  backward(loss);
  AdamState<double> st;
  adam_step<double>({&p}, st, OptimizerConfig{}, 1);
  for (double v : p.value.data()) EXPECT_NEAR(v, 1.0 - 1e-3, 1e-6);
}

TEST(Adam, ZeroGradientIsNoOp) {
  Parameter<double> p("p", T::full({3}, 2.0));
  p.value.node().grad_buffer();
  AdamState<double> st;
  adam_step<double>({&p}, st, OptimizerConfig{}, 1);
  for (double v : p.value.data()) EXPECT_EQ(v, 2.0);
}

TEST(Adam, FrozenWithStaleGradientUnchanged) {
  Parameter<double> p("p", T::full({3}, 2.0));
  auto loss = sum(p.value);
  backward(loss);
  p.frozen = true;
  ASSERT_TRUE(p.value.has_grad());
  AdamState<double> st;
  adam_step<double>({&p}, st, OptimizerConfig{}, 1);
  for (double v : p.value.data()) EXPECT_EQ(v, 2.0);
}

TEST(Adam, NonPositiveStepIsUsageError) {
  Parameter<double> p("p", T::full({1}, 0.0));
  AdamState<double> st;
  EXPECT_THROW(adam_step<double>({&p}, st, OptimizerConfig{}, 0), UsageError);
}

TEST(Checkpoint, RoundTripIsExact) {
  Checkpoint ck;
  ck.meta = {{"note", "x"}};
  ck.entries.push_back({"w", false, {2, 3}, true, {1.5f, -2.25f, 3e-8f, 0.0f, -0.0f, 1e30f}});
  ck.entries.push_back({"bn.running_var", true, {2}, false, {1.0f, 0.5f}});
  const auto back = decode_checkpoint(encode_checkpoint(ck));
  EXPECT_EQ(back.meta, ck.meta);
  EXPECT_EQ(back.entries, ck.entries);
  const auto bytes = encode_checkpoint(ck);
  EXPECT_THROW(decode_checkpoint(std::string_view(bytes).substr(0, bytes.size() - 2)), ParseError);
}

TEST(GradCheck, LayerSuitePasses) {
  for (const auto& r : arousal::testing::gradient_suite()) EXPECT_TRUE(r.pass) << r.name << ": " << r.detail;
}

TEST(GradCheck, DetectsPerturbedGradient) {
  arousal::testing::GradSuiteOptions opt;
  opt.trials = 2;
  opt.perturbation = 1e-2;
  for (const auto& r : arousal::testing::gradient_suite(opt)) EXPECT_FALSE(r.pass) << r.name;
}
