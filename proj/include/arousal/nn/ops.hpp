#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "arousal/nn/gemm.hpp"
#include "arousal/nn/tensor.hpp"

namespace arousal::nn {

namespace detail {

template <class S>
void accumulate(Node<S>& parent, std::span<const S> g) {
  if (!parent.requires_grad) return;
  S* dst = parent.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

inline void expect_rank(const Shape& s, std::size_t r, const char* op) {
  if (s.size() != r)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(r) + " input, got " + to_string(s));
}

}  // namespace detail

// ---------------------------------------------------------------- layout ops

template <class S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
  if (numel_of(shape) != x.numel())
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  auto out = make_result<S>(std::move(shape), {&x});
  std::copy(x.data().begin(), x.data().end(), out.data().begin());
  if (out.requires_grad())
    out.node().backward_fn = [](Node<S>& self) { detail::accumulate<S>(*self.parents[0], self.grad); };
  return out;
}

// out.shape[i] = x.shape[perm[i]]
template <class S>
Tensor<S> permute(const Tensor<S>& x, const std::vector<std::size_t>& perm) {
  const auto& in = x.shape();
  if (perm.size() != in.size()) throw ShapeError("permute: permutation rank mismatch for " + to_string(in));
  const std::size_t r = in.size();
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = in.at(perm[i]);
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * in[i];

  // Source offset of every output element, in output order.
  std::vector<std::size_t> src(x.numel());
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t o = 0; o < src.size(); ++o) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < r; ++i) off += idx[i] * in_strides[perm[i]];
    src[o] = off;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  auto out = make_result<S>(out_shape, {&x});
  for (std::size_t o = 0; o < src.size(); ++o) out[o] = x[src[o]];
  if (out.requires_grad())
    out.node().backward_fn = [src = std::move(src)](Node<S>& self) {
      auto& p = *self.parents[0];
      S* g = p.grad_buffer();
      for (std::size_t o = 0; o < src.size(); ++o) g[src[o]] += self.grad[o];
    };
  return out;
}

// [N, F, T] -> [N, F, 2, T] by duplicating along a new direction axis.
template <class S>
Tensor<S> repeat_direction(const Tensor<S>& x) {
  detail::expect_rank(x.shape(), 3, "repeat_direction");
  const std::size_t n = x.dim(0), f = x.dim(1), t = x.dim(2);
  auto out = make_result<S>({n, f, 2, t}, {&x});
  for (std::size_t i = 0; i < n * f; ++i)
    for (std::size_t d = 0; d < 2; ++d)
      std::copy_n(x.data().begin() + i * t, t, out.data().begin() + (i * 2 + d) * t);
  if (out.requires_grad())
    out.node().backward_fn = [n, f, t](Node<S>& self) {
      S* g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < n * f; ++i)
        for (std::size_t d = 0; d < 2; ++d)
          for (std::size_t k = 0; k < t; ++k) g[i * t + k] += self.grad[(i * 2 + d) * t + k];
    };
  return out;
}

// ------------------------------------------------------------- elementwise

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) throw ShapeError("add: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  auto out = make_result<S>(a.shape(), {&a, &b});
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] + b[i];
  if (out.requires_grad())
    out.node().backward_fn = [](Node<S>& self) {
      detail::accumulate<S>(*self.parents[0], self.grad);
      detail::accumulate<S>(*self.parents[1], self.grad);
    };
  return out;
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) throw ShapeError("mul: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  auto out = make_result<S>(a.shape(), {&a, &b});
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] * b[i];
  if (out.requires_grad())
    out.node().backward_fn = [](Node<S>& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      if (pa.requires_grad) {
        S* g = pa.grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pb.data[i];
      }
      if (pb.requires_grad) {
        S* g = pb.grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pa.data[i];
      }
    };
  return out;
}

template <class S>
Tensor<S> sum(const Tensor<S>& x) {
  auto out = make_result<S>({1}, {&x});
  S acc{0};
  for (S v : x.data()) acc += v;
  out[0] = acc;
  if (out.requires_grad())
    out.node().backward_fn = [](Node<S>& self) {
      auto& p = *self.parents[0];
      S* g = p.grad_buffer();
      for (std::size_t i = 0; i < p.data.size(); ++i) g[i] += self.grad[0];
    };
  return out;
}

template <class S>
Tensor<S> relu(const Tensor<S>& x) {
  auto out = make_result<S>(x.shape(), {&x});
  // NaN passes through so divergence stays visible downstream.
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] < S{0} ? S{0} : x[i];
  if (out.requires_grad())
    out.node().backward_fn = [](Node<S>& self) {
      auto& p = *self.parents[0];
      S* g = p.grad_buffer();
      for (std::size_t i = 0; i < p.data.size(); ++i)
        if (p.data[i] > S{0}) g[i] += self.grad[i];
    };
  return out;
}

template <class S>
Tensor<S> softmax(const Tensor<S>& x, std::size_t axis) {
  const auto& s = x.shape();
  if (axis >= s.size()) throw ShapeError("softmax: axis out of range for " + to_string(s));
  if (s[axis] == 0) throw ShapeError("softmax: empty axis");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];

  auto out = make_result<S>(s, {&x});
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      S mx = x[base];
      for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, x[base + k * inner]);
      S z{0};
      for (std::size_t k = 0; k < len; ++k) z += out[base + k * inner] = std::exp(x[base + k * inner] - mx);
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= z;
    }
  if (out.requires_grad())
    out.node().backward_fn = [outer, inner, len](Node<S>& self) {
      S* g = self.parents[0]->grad_buffer();
      const auto& y = self.data;
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * len * inner + in;
          S dot{0};
          for (std::size_t k = 0; k < len; ++k) dot += self.grad[base + k * inner] * y[base + k * inner];
          for (std::size_t k = 0; k < len; ++k) {
            const auto i = base + k * inner;
            g[i] += y[i] * (self.grad[i] - dot);
          }
        }
    };
  return out;
}

// Average pooling over the last axis.
template <class S>
Tensor<S> avgpool1d(const Tensor<S>& x, std::size_t kernel, std::size_t stride) {
  const auto& s = x.shape();
  if (s.empty() || kernel == 0 || stride == 0 || s.back() < kernel)
    throw ShapeError("avgpool1d: kernel " + std::to_string(kernel) + " does not fit " + to_string(s));
  const std::size_t len = s.back();
  const std::size_t rows = x.numel() / len;
  const std::size_t out_len = (len - kernel) / stride + 1;
  Shape os = s;
  os.back() = out_len;
  auto out = make_result<S>(os, {&x});
  const S inv = S{1} / static_cast<S>(kernel);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < out_len; ++j) {
      S acc{0};
      for (std::size_t k = 0; k < kernel; ++k) acc += x[r * len + j * stride + k];
      out[r * out_len + j] = acc * inv;
    }
  if (out.requires_grad())
    out.node().backward_fn = [=](Node<S>& self) {
      S* g = self.parents[0]->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < out_len; ++j)
          for (std::size_t k = 0; k < kernel; ++k) g[r * len + j * stride + k] += self.grad[r * out_len + j] * inv;
    };
  return out;
}

// ------------------------------------------------------------- convolution

struct Conv2dGeometry {
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_top = 0, pad_bottom = 0, pad_left = 0, pad_right = 0;
};

// Cross-correlation. x [N, Cin, H, W], weight [Cout, Cin, kh, kw], bias [Cout].
template <class S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>& bias, Conv2dGeometry geo = {}) {
  detail::expect_rank(x.shape(), 4, "conv2d input");
  detail::expect_rank(weight.shape(), 4, "conv2d weight");
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != cin)
    throw ShapeError("conv2d: input has " + std::to_string(cin) + " channels, weight expects " +
                     std::to_string(weight.dim(1)));
  if (bias.numel() != cout)
    throw ShapeError("conv2d: bias has " + std::to_string(bias.numel()) + " entries for " + std::to_string(cout) +
                     " output channels");
  const std::size_t hp = h + geo.pad_top + geo.pad_bottom, wp = w + geo.pad_left + geo.pad_right;
  if (kh > hp || kw > wp || geo.stride_h == 0 || geo.stride_w == 0)
    throw ShapeError("conv2d: kernel (" + std::to_string(kh) + "," + std::to_string(kw) +
                     ") does not fit padded input (" + std::to_string(hp) + "," + std::to_string(wp) + ")");
  const std::size_t ho = (hp - kh) / geo.stride_h + 1, wo = (wp - kw) / geo.stride_w + 1;
  const std::size_t kdim = cin * kh * kw, pdim = ho * wo;

  // im2col for every sample; kept for the weight gradient.
  std::vector<S> cols(n * kdim * pdim, S{0});
  for (std::size_t b = 0; b < n; ++b) {
    S* cb = cols.data() + b * kdim * pdim;
    for (std::size_t c = 0; c < cin; ++c)
      for (std::size_t i = 0; i < kh; ++i)
        for (std::size_t j = 0; j < kw; ++j) {
          S* row = cb + ((c * kh + i) * kw + j) * pdim;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * geo.stride_h + i) - static_cast<std::ptrdiff_t>(geo.pad_top);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            const S* src = x.data().data() + ((b * cin + c) * h + static_cast<std::size_t>(iy)) * w;
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * geo.stride_w + j) - static_cast<std::ptrdiff_t>(geo.pad_left);
              if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) row[oy * wo + ox] = src[ix];
            }
          }
        }
  }

  auto out = make_result<S>({n, cout, ho, wo}, {&x, &weight, &bias});
  for (std::size_t b = 0; b < n; ++b) {
    S* ob = out.data().data() + b * cout * pdim;
    for (std::size_t o = 0; o < cout; ++o) std::fill_n(ob + o * pdim, pdim, bias[o]);
    gemm<S>(false, false, cout, pdim, kdim, S{1}, weight.data().data(), cols.data() + b * kdim * pdim, S{1}, ob);
  }

  if (out.requires_grad())
    out.node().backward_fn = [=, cols = std::move(cols)](Node<S>& self) {
      auto& px = *self.parents[0];
      auto& pw = *self.parents[1];
      auto& pb = *self.parents[2];
      const S* gout = self.grad.data();
      if (pb.requires_grad) {
        S* gb = pb.grad_buffer();
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t o = 0; o < cout; ++o) {
            const S* r = gout + (b * cout + o) * pdim;
            S acc{0};
            for (std::size_t p = 0; p < pdim; ++p) acc += r[p];
            gb[o] += acc;
          }
      }
      if (pw.requires_grad) {
        S* gw = pw.grad_buffer();
        for (std::size_t b = 0; b < n; ++b)
          gemm<S>(false, true, cout, kdim, pdim, S{1}, gout + b * cout * pdim, cols.data() + b * kdim * pdim, S{1}, gw);
      }
      if (px.requires_grad) {
        S* gx = px.grad_buffer();
        std::vector<S> dcols(kdim * pdim);
        for (std::size_t b = 0; b < n; ++b) {
          gemm<S>(true, false, kdim, pdim, cout, S{1}, pw.data.data(), gout + b * cout * pdim, S{0}, dcols.data());
          for (std::size_t c = 0; c < cin; ++c)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const S* row = dcols.data() + ((c * kh + i) * kw + j) * pdim;
                for (std::size_t oy = 0; oy < ho; ++oy) {
                  const auto iy = static_cast<std::ptrdiff_t>(oy * geo.stride_h + i) - static_cast<std::ptrdiff_t>(geo.pad_top);
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                  S* dst = gx + ((b * cin + c) * h + static_cast<std::size_t>(iy)) * w;
                  for (std::size_t ox = 0; ox < wo; ++ox) {
                    const auto ix = static_cast<std::ptrdiff_t>(ox * geo.stride_w + j) - static_cast<std::ptrdiff_t>(geo.pad_left);
                    if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[ix] += row[oy * wo + ox];
                  }
                }
              }
        }
      }
    };
  return out;
}

// ----------------------------------------------------------- batch norm

enum class Mode { kTrain, kEval };

template <class S>
struct BatchNormState {
  std::vector<S> running_mean;
  std::vector<S> running_var;
  S momentum = S(0.1);
  S eps = S(1e-5);
  std::size_t batches_tracked = 0;  // 0 == running statistics never populated
  bool stats_set = false;           // running statistics assigned explicitly

  explicit BatchNormState(std::size_t features = 0)
      : running_mean(features, S{0}), running_var(features, S{1}) {}

  bool initialized() const noexcept { return batches_tracked > 0 || stats_set; }

  void set_running_stats(std::vector<S> mean, std::vector<S> var) {
    running_mean = std::move(mean);
    running_var = std::move(var);
    stats_set = true;
  }

  void reset() {
    std::fill(running_mean.begin(), running_mean.end(), S{0});
    std::fill(running_var.begin(), running_var.end(), S{1});
    batches_tracked = 0;
    stats_set = false;
  }
};

// x [N, F, H, W]; statistics per feature map over (N, H, W).
template <class S>
Tensor<S> batchnorm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta, BatchNormState<S>& state,
                    Mode mode) {
  detail::expect_rank(x.shape(), 4, "batchnorm");
  const std::size_t n = x.dim(0), f = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gamma.numel() != f || beta.numel() != f || state.running_mean.size() != f)
    throw ShapeError("batchnorm: parameters sized for " + std::to_string(gamma.numel()) + " features, input has " +
                     std::to_string(f));
  const std::size_t m = n * hw;
  if (mode == Mode::kTrain && m < 2)
    throw UsageError("batchnorm: train mode needs at least 2 values per feature map");
  if (mode == Mode::kEval && !state.initialized())
    throw StateError("batchnorm: eval mode requested before running statistics exist");

  std::vector<S> mean(f), inv_std(f);
  for (std::size_t c = 0; c < f; ++c) {
    if (mode == Mode::kTrain) {
      double mu = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < hw; ++i) mu += x[(b * f + c) * hw + i];
      mu /= static_cast<double>(m);
      double var = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < hw; ++i) {
          const double d = x[(b * f + c) * hw + i] - mu;
          var += d * d;
        }
      var /= static_cast<double>(m);
      mean[c] = static_cast<S>(mu);
      inv_std[c] = static_cast<S>(1.0 / std::sqrt(var + static_cast<double>(state.eps)));
      const S unbiased = static_cast<S>(var * static_cast<double>(m) / static_cast<double>(m - 1));
      state.running_mean[c] = (S{1} - state.momentum) * state.running_mean[c] + state.momentum * mean[c];
      state.running_var[c] = (S{1} - state.momentum) * state.running_var[c] + state.momentum * unbiased;
    } else {
      mean[c] = state.running_mean[c];
      inv_std[c] = S{1} / std::sqrt(state.running_var[c] + state.eps);
    }
  }
  if (mode == Mode::kTrain) ++state.batches_tracked;

  auto out = make_result<S>(x.shape(), {&x, &gamma, &beta});
  std::vector<S> xhat(x.numel());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t c = 0; c < f; ++c)
      for (std::size_t i = 0; i < hw; ++i) {
        const auto k = (b * f + c) * hw + i;
        xhat[k] = (x[k] - mean[c]) * inv_std[c];
        out[k] = gamma[c] * xhat[k] + beta[c];
      }
  if (out.requires_grad())
    out.node().backward_fn = [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<S>& self) {
      auto& px = *self.parents[0];
      auto& pg = *self.parents[1];
      auto& pb = *self.parents[2];
      const auto& dy = self.grad;
      std::vector<S> sum_dy(f, S{0}), sum_dy_xhat(f, S{0});
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < f; ++c)
          for (std::size_t i = 0; i < hw; ++i) {
            const auto k = (b * f + c) * hw + i;
            sum_dy[c] += dy[k];
            sum_dy_xhat[c] += dy[k] * xhat[k];
          }
      if (pg.requires_grad) {
        S* g = pg.grad_buffer();
        for (std::size_t c = 0; c < f; ++c) g[c] += sum_dy_xhat[c];
      }
      if (pb.requires_grad) {
        S* g = pb.grad_buffer();
        for (std::size_t c = 0; c < f; ++c) g[c] += sum_dy[c];
      }
      if (px.requires_grad) {
        S* g = px.grad_buffer();
        const S inv_m = S{1} / static_cast<S>(m);
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t c = 0; c < f; ++c) {
            const S scale = pg.data[c] * inv_std[c];
            for (std::size_t i = 0; i < hw; ++i) {
              const auto k = (b * f + c) * hw + i;
              if (mode == Mode::kTrain)
                g[k] += scale * (dy[k] - inv_m * sum_dy[c] - xhat[k] * inv_m * sum_dy_xhat[c]);
              else
                g[k] += scale * dy[k];
            }
          }
      }
    };
  return out;
}

}  // namespace arousal::nn
