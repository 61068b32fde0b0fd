#pragma once

// Bidirectional GRU, gate order (r, z, n):
//
//   r_t = sigmoid(Wr x_t + Ur h_{t-1} + br)
//   z_t = sigmoid(Wz x_t + Uz h_{t-1} + bz)
//   n_t = tanh(Wn x_t + Un (r_t * h_{t-1}) + bn)
//   h_t = z_t * h_{t-1} + (1 - z_t) * n_t
//
// The reset gate multiplies the previous state before the recurrent product.
// h_0 = 0 for both directions. Backpropagation through time is fused into
// the op rather than recorded per step.

#include <cmath>
#include <vector>

#include "arousal/nn/gemm.hpp"
#include "arousal/nn/tensor.hpp"

namespace arousal::nn {

template <class S>
struct GruWeights {
  Tensor<S> w_ih;  // [3H, F]
  Tensor<S> w_hh;  // [3H, H]
  Tensor<S> bias;  // [3H]
};

namespace detail {

template <class S>
S sigmoid(S v) {
  return S{1} / (S{1} + std::exp(-v));
}

// Saved activations of one direction, indexed [step][n][h] in processing order.
template <class S>
struct GruTrace {
  std::vector<S> r, z, cand, h_prev, rh;
};

template <class S>
struct GruDims {
  std::size_t n, f, t, h;
};

// x_ntf: input laid out [N, T, F]. Writes h_t into out[n, :, dir, t].
template <class S>
GruTrace<S> gru_forward(const GruDims<S>& d, const std::vector<S>& x_ntf, const GruWeights<S>& w, bool reverse,
                        std::size_t dir, std::span<S> out) {
  const std::size_t n = d.n, T = d.t, H = d.h, F = d.f, G = 3 * H;
  std::vector<S> gx(n * T * G);
  gemm<S>(false, true, n * T, G, F, S{1}, x_ntf.data(), w.w_ih.data().data(), S{0}, gx.data());
  for (std::size_t row = 0; row < n * T; ++row)
    for (std::size_t k = 0; k < G; ++k) gx[row * G + k] += w.bias[k];

  GruTrace<S> tr;
  tr.r.resize(T * n * H);
  tr.z.resize(T * n * H);
  tr.cand.resize(T * n * H);
  tr.h_prev.resize(T * n * H);
  tr.rh.resize(T * n * H);
  std::vector<S> h(n * H, S{0}), hrz(n * 2 * H), hn(n * H);
  const S* whh = w.w_hh.data().data();
  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t = reverse ? T - 1 - step : step;
    const std::size_t base = step * n * H;
    std::copy(h.begin(), h.end(), tr.h_prev.begin() + base);
    gemm<S>(false, true, n, 2 * H, H, S{1}, h.data(), whh, S{0}, hrz.data());
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t j = 0; j < H; ++j) {
        const S* g = gx.data() + (b * T + t) * G;
        const auto k = base + b * H + j;
        tr.r[k] = sigmoid(g[j] + hrz[b * 2 * H + j]);
        tr.z[k] = sigmoid(g[H + j] + hrz[b * 2 * H + H + j]);
        tr.rh[k] = tr.r[k] * h[b * H + j];
      }
    gemm<S>(false, true, n, H, H, S{1}, tr.rh.data() + base, whh + 2 * H * H, S{0}, hn.data());
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t j = 0; j < H; ++j) {
        const S* g = gx.data() + (b * T + t) * G;
        const auto k = base + b * H + j;
        tr.cand[k] = std::tanh(g[2 * H + j] + hn[b * H + j]);
        h[b * H + j] = tr.z[k] * h[b * H + j] + (S{1} - tr.z[k]) * tr.cand[k];
        out[((b * H + j) * 2 + dir) * T + t] = h[b * H + j];
      }
  }
  return tr;
}

// Accumulates gradients for one direction. dout is the full [N, H, 2, T] grad.
template <class S>
void gru_backward(const GruDims<S>& d, const std::vector<S>& x_ntf, const GruTrace<S>& tr, Node<S>& w_ih,
                  Node<S>& w_hh, Node<S>& bias, bool reverse, std::size_t dir, const std::vector<S>& dout,
                  std::vector<S>& dx_ntf) {
  const std::size_t n = d.n, T = d.t, H = d.h, F = d.f, G = 3 * H;
  std::vector<S> dgx(n * T * G, S{0});
  std::vector<S> dh(n * H, S{0}), da_rz(n * 2 * H), da_n(n * H), d_rh(n * H);
  std::vector<S> dwhh(G * H, S{0});
  const S* whh = w_hh.data.data();
  for (std::size_t step = T; step-- > 0;) {
    const std::size_t t = reverse ? T - 1 - step : step;
    const std::size_t base = step * n * H;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t j = 0; j < H; ++j) dh[b * H + j] += dout[((b * H + j) * 2 + dir) * T + t];

    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t j = 0; j < H; ++j) {
        const auto k = base + b * H + j;
        const S g = dh[b * H + j];
        const S z = tr.z[k], c = tr.cand[k], hp = tr.h_prev[k];
        const S dz = g * (hp - c);
        da_n[b * H + j] = g * (S{1} - z) * (S{1} - c * c);
        da_rz[b * 2 * H + H + j] = dz * z * (S{1} - z);
        dh[b * H + j] = g * z;
      }
    // n-gate recurrent product: An = rh Un^T
    gemm<S>(false, false, n, H, H, S{1}, da_n.data(), whh + 2 * H * H, S{0}, d_rh.data());
    gemm<S>(true, false, H, H, n, S{1}, da_n.data(), tr.rh.data() + base, S{1}, dwhh.data() + 2 * H * H);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t j = 0; j < H; ++j) {
        const auto k = base + b * H + j;
        const S r = tr.r[k];
        const S dr = d_rh[b * H + j] * tr.h_prev[k];
        dh[b * H + j] += d_rh[b * H + j] * r;
        da_rz[b * 2 * H + j] = dr * r * (S{1} - r);
      }
    gemm<S>(false, false, n, H, 2 * H, S{1}, da_rz.data(), whh, S{1}, dh.data());
    gemm<S>(true, false, 2 * H, H, n, S{1}, da_rz.data(), tr.h_prev.data() + base, S{1}, dwhh.data());
    for (std::size_t b = 0; b < n; ++b) {
      S* g = dgx.data() + (b * T + t) * G;
      for (std::size_t j = 0; j < 2 * H; ++j) g[j] = da_rz[b * 2 * H + j];
      for (std::size_t j = 0; j < H; ++j) g[2 * H + j] = da_n[b * H + j];
    }
  }
  if (w_hh.requires_grad) {
    S* g = w_hh.grad_buffer();
    for (std::size_t i = 0; i < dwhh.size(); ++i) g[i] += dwhh[i];
  }
  if (bias.requires_grad) {
    S* g = bias.grad_buffer();
    for (std::size_t row = 0; row < n * T; ++row)
      for (std::size_t k = 0; k < G; ++k) g[k] += dgx[row * G + k];
  }
  if (w_ih.requires_grad)
    gemm<S>(true, false, G, F, n * T, S{1}, dgx.data(), x_ntf.data(), S{1}, w_ih.grad_buffer());
  gemm<S>(false, false, n * T, F, G, S{1}, dgx.data(), w_ih.data.data(), S{1}, dx_ntf.data());
}

}  // namespace detail

// x [N, F, T] -> [N, H, 2, T]; direction 0 runs forward in time, 1 backward.
template <class S>
Tensor<S> bigru(const Tensor<S>& x, const GruWeights<S>& fwd, const GruWeights<S>& bwd) {
  if (x.rank() != 3) throw ShapeError("bigru: expected [N, F, T] input, got " + to_string(x.shape()));
  const std::size_t n = x.dim(0), f = x.dim(1), t = x.dim(2), h = fwd.w_hh.dim(1);
  for (const auto* w : {&fwd, &bwd})
    if (w->w_ih.shape() != Shape{3 * h, f} || w->w_hh.shape() != Shape{3 * h, h} || w->bias.numel() != 3 * h)
      throw ShapeError("bigru: weights do not match input features " + std::to_string(f) + " / hidden " +
                       std::to_string(h));
  const detail::GruDims<S> dims{n, f, t, h};

  std::vector<S> x_ntf(n * t * f);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t c = 0; c < f; ++c)
      for (std::size_t k = 0; k < t; ++k) x_ntf[(b * t + k) * f + c] = x[(b * f + c) * t + k];

  auto out = make_result<S>({n, h, 2, t},
                            {&x, &fwd.w_ih, &fwd.w_hh, &fwd.bias, &bwd.w_ih, &bwd.w_hh, &bwd.bias});
  auto tr_f = detail::gru_forward(dims, x_ntf, fwd, false, 0, out.data());
  auto tr_b = detail::gru_forward(dims, x_ntf, bwd, true, 1, out.data());

  if (out.requires_grad())
    out.node().backward_fn = [dims, x_ntf = std::move(x_ntf), tr_f = std::move(tr_f),
                              tr_b = std::move(tr_b)](Node<S>& self) {
      auto& p = self.parents;
      std::vector<S> dx(x_ntf.size(), S{0});
      detail::gru_backward(dims, x_ntf, tr_f, *p[1], *p[2], *p[3], false, 0, self.grad, dx);
      detail::gru_backward(dims, x_ntf, tr_b, *p[4], *p[5], *p[6], true, 1, self.grad, dx);
      if (p[0]->requires_grad) {
        S* g = p[0]->grad_buffer();
        for (std::size_t b = 0; b < dims.n; ++b)
          for (std::size_t c = 0; c < dims.f; ++c)
            for (std::size_t k = 0; k < dims.t; ++k) g[(b * dims.f + c) * dims.t + k] += dx[(b * dims.t + k) * dims.f + c];
      }
    };
  return out;
}

}  // namespace arousal::nn
