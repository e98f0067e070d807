#pragma once

#include <cstdint>
#include <vector>

#include "sharp/errors.hpp"
#include "sharp/kernels.hpp"
#include "sharp/rng.hpp"
#include "sharp/tensor.hpp"

namespace sharp {

// Connection masks are authoritative: a weight whose mask bit is off is held
// at exactly 0.0f and its gradient is identically zero, so dense arithmetic
// and masked semantics coincide bit for bit.

class MaskedLinear {
 public:
  MaskedLinear() = default;
  MaskedLinear(int in_features, int out_features)
      : in_(in_features), out_(out_features) {
    if (in_ <= 0 || out_ <= 0) throw ConfigError("linear dims must be positive");
    std::size_t nw = static_cast<std::size_t>(in_) * static_cast<std::size_t>(out_);
    weight.assign(nw, 0.0f);
    d_weight.assign(nw, 0.0f);
    conn_mask.assign(nw, 1);
    freeze_mask.assign(nw, 0);
    bias.assign(static_cast<std::size_t>(out_), 0.0f);
    d_bias.assign(static_cast<std::size_t>(out_), 0.0f);
    bias_frozen.assign(static_cast<std::size_t>(out_), 0);
  }

  int in_features() const { return in_; }
  int out_features() const { return out_; }
  std::size_t weight_count() const { return weight.size(); }

  float init_bound() const { return 1.0f / std::sqrt(static_cast<float>(in_)); }

  void init_weights(Rng& rng) {
    const float b = init_bound();
    for (auto& w : weight) w = uniform_float(rng, -b, b);
    for (auto& v : bias) v = uniform_float(rng, -b, b);
    apply_mask();
  }

  // Redraw one unit's incoming weights and bias; mask stays authoritative.
  void reinit_unit(int o, Rng& rng) {
    const float b = init_bound();
    float* row = weight.data() + static_cast<std::size_t>(o) * in_;
    const std::uint8_t* mrow = conn_mask.data() + static_cast<std::size_t>(o) * in_;
    for (int i = 0; i < in_; ++i) {
      float v = uniform_float(rng, -b, b);
      row[i] = mrow[i] ? v : 0.0f;
    }
    bias[static_cast<std::size_t>(o)] = uniform_float(rng, -b, b);
  }

  void apply_mask() {
    for (std::size_t i = 0; i < weight.size(); ++i)
      if (!conn_mask[i]) weight[i] = 0.0f;
  }

  void zero_grad() {
    std::fill(d_weight.begin(), d_weight.end(), 0.0f);
    std::fill(d_bias.begin(), d_bias.end(), 0.0f);
  }

  // x: [N x in] (trailing dims flattened). Returns [N x out].
  Tensor forward(const Tensor& x) const {
    const int n = x.dim(0);
    if (x.numel() != static_cast<std::int64_t>(n) * in_)
      throw ConfigError("linear input " + x.shape_str() + " does not match in_features " +
                        std::to_string(in_));
    Tensor y({n, out_});
    const float* xp = x.data();
    float* yp = y.data();
    for (int b = 0; b < n; ++b) {
      const float* xr = xp + static_cast<std::size_t>(b) * in_;
      float* yr = yp + static_cast<std::size_t>(b) * out_;
      for (int o = 0; o < out_; ++o)
        yr[o] = bias[static_cast<std::size_t>(o)] +
                kernels::dot(weight.data() + static_cast<std::size_t>(o) * in_, xr,
                             static_cast<std::size_t>(in_));
    }
    return y;
  }

  // Accumulates d_weight/d_bias; writes input gradient into *dx if given.
  void backward(const Tensor& x, const Tensor& dy, Tensor* dx) {
    const int n = x.dim(0);
    const float* xp = x.data();
    const float* gp = dy.data();
    for (int b = 0; b < n; ++b) {
      const float* xr = xp + static_cast<std::size_t>(b) * in_;
      const float* gr = gp + static_cast<std::size_t>(b) * out_;
      for (int o = 0; o < out_; ++o) {
        const float g = gr[o];
        if (g != 0.0f)
          kernels::axpy(g, xr, d_weight.data() + static_cast<std::size_t>(o) * in_,
                        static_cast<std::size_t>(in_));
        d_bias[static_cast<std::size_t>(o)] += g;
      }
    }
    for (std::size_t i = 0; i < d_weight.size(); ++i)
      if (!conn_mask[i]) d_weight[i] = 0.0f;
    if (dx) {
      float* dxp = dx->data();
      for (int b = 0; b < n; ++b) {
        const float* gr = gp + static_cast<std::size_t>(b) * out_;
        float* dxr = dxp + static_cast<std::size_t>(b) * in_;
        for (int o = 0; o < out_; ++o) {
          const float g = gr[o];
          if (g != 0.0f)
            kernels::axpy(g, weight.data() + static_cast<std::size_t>(o) * in_, dxr,
                          static_cast<std::size_t>(in_));
        }
      }
    }
  }

  std::vector<float> weight, d_weight, bias, d_bias;
  std::vector<std::uint8_t> conn_mask, freeze_mask;  // [out x in]
  std::vector<std::uint8_t> bias_frozen;             // [out]

 private:
  int in_ = 0, out_ = 0;
};

// 2-D convolution whose connection granularity is the (out, in) channel pair:
// one mask bit gates an entire kh x kw kernel slice.
class MaskedConv2d {
 public:
  MaskedConv2d() = default;
  MaskedConv2d(int in_ch, int out_ch, int kernel, int stride, int padding)
      : in_(in_ch), out_(out_ch), kh_(kernel), kw_(kernel), stride_(stride), pad_(padding) {
    if (in_ <= 0 || out_ <= 0 || kernel <= 0 || stride <= 0 || padding < 0)
      throw ConfigError("bad conv geometry");
    std::size_t nw = static_cast<std::size_t>(in_) * out_ * kh_ * kw_;
    weight.assign(nw, 0.0f);
    d_weight.assign(nw, 0.0f);
    conn_mask.assign(static_cast<std::size_t>(in_) * out_, 1);
    freeze_mask.assign(static_cast<std::size_t>(in_) * out_, 0);
    bias.assign(static_cast<std::size_t>(out_), 0.0f);
    d_bias.assign(static_cast<std::size_t>(out_), 0.0f);
    bias_frozen.assign(static_cast<std::size_t>(out_), 0);
  }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return kh_; }
  int stride() const { return stride_; }
  int padding() const { return pad_; }
  std::size_t pair_count() const { return conn_mask.size(); }
  std::size_t slice_elems() const { return static_cast<std::size_t>(kh_) * kw_; }

  float init_bound() const { return 1.0f / std::sqrt(static_cast<float>(in_ * kh_ * kw_)); }

  void init_weights(Rng& rng) {
    const float b = init_bound();
    for (auto& w : weight) w = uniform_float(rng, -b, b);
    for (auto& v : bias) v = uniform_float(rng, -b, b);
    apply_mask();
  }

  void reinit_unit(int o, Rng& rng) {
    const float b = init_bound();
    for (int i = 0; i < in_; ++i) {
      float* k = weight.data() + (static_cast<std::size_t>(o) * in_ + i) * slice_elems();
      const bool on = conn_mask[static_cast<std::size_t>(o) * in_ + i] != 0;
      for (std::size_t e = 0; e < slice_elems(); ++e) {
        float v = uniform_float(rng, -b, b);
        k[e] = on ? v : 0.0f;
      }
    }
    bias[static_cast<std::size_t>(o)] = uniform_float(rng, -b, b);
  }

  void apply_mask() {
    for (std::size_t p = 0; p < conn_mask.size(); ++p)
      if (!conn_mask[p])
        std::fill_n(weight.data() + p * slice_elems(), slice_elems(), 0.0f);
  }

  void zero_grad() {
    std::fill(d_weight.begin(), d_weight.end(), 0.0f);
    std::fill(d_bias.begin(), d_bias.end(), 0.0f);
  }

  int out_h(int ih) const { return (ih + 2 * pad_ - kh_) / stride_ + 1; }
  int out_w(int iw) const { return (iw + 2 * pad_ - kw_) / stride_ + 1; }

  // x: [N x in x H x W] -> [N x out x OH x OW]. Masked-off pairs are skipped
  // outright; with their kernels pinned to zero this is bit-identical to the
  // dense computation.
  Tensor forward(const Tensor& x) const {
    check_input_(x);
    const int n = x.dim(0), ih = x.dim(2), iw = x.dim(3);
    const int oh = out_h(ih), ow = out_w(iw);
    if (oh <= 0 || ow <= 0) throw ConfigError("conv output would be empty");
    Tensor y({n, out_, oh, ow});
    const std::size_t in_plane = static_cast<std::size_t>(ih) * iw;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
    for (int b = 0; b < n; ++b) {
      for (int o = 0; o < out_; ++o) {
        float* yp = y.data() + (static_cast<std::size_t>(b) * out_ + o) * out_plane;
        std::fill_n(yp, out_plane, bias[static_cast<std::size_t>(o)]);
        for (int i = 0; i < in_; ++i) {
          if (!conn_mask[static_cast<std::size_t>(o) * in_ + i]) continue;
          const float* xp = x.data() + (static_cast<std::size_t>(b) * in_ + i) * in_plane;
          const float* kp = weight.data() + (static_cast<std::size_t>(o) * in_ + i) * slice_elems();
          corr2d_acc_(xp, ih, iw, kp, yp, oh, ow);
        }
      }
    }
    return y;
  }

  void backward(const Tensor& x, const Tensor& dy, Tensor* dx) {
    const int n = x.dim(0), ih = x.dim(2), iw = x.dim(3);
    const int oh = dy.dim(2), ow = dy.dim(3);
    const std::size_t in_plane = static_cast<std::size_t>(ih) * iw;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
    for (int b = 0; b < n; ++b) {
      for (int o = 0; o < out_; ++o) {
        const float* gp = dy.data() + (static_cast<std::size_t>(b) * out_ + o) * out_plane;
        double gsum = 0.0;
        for (std::size_t e = 0; e < out_plane; ++e) gsum += gp[e];
        d_bias[static_cast<std::size_t>(o)] += static_cast<float>(gsum);
        for (int i = 0; i < in_; ++i) {
          if (!conn_mask[static_cast<std::size_t>(o) * in_ + i]) continue;
          const float* xp = x.data() + (static_cast<std::size_t>(b) * in_ + i) * in_plane;
          float* dkp = d_weight.data() + (static_cast<std::size_t>(o) * in_ + i) * slice_elems();
          wgrad_acc_(xp, ih, iw, gp, oh, ow, dkp);
          if (dx) {
            const float* kp =
                weight.data() + (static_cast<std::size_t>(o) * in_ + i) * slice_elems();
            float* dxp = dx->data() + (static_cast<std::size_t>(b) * in_ + i) * in_plane;
            dgrad_acc_(gp, oh, ow, kp, dxp, ih, iw);
          }
        }
      }
    }
  }

  std::vector<float> weight, d_weight, bias, d_bias;
  std::vector<std::uint8_t> conn_mask, freeze_mask;  // [out x in] pair granularity
  std::vector<std::uint8_t> bias_frozen;

 private:
  void check_input_(const Tensor& x) const {
    if (x.ndim() != 4 || x.dim(1) != in_)
      throw ConfigError("conv input " + x.shape_str() + " does not match in_channels " +
                        std::to_string(in_));
  }

  // y[oy][ox] += sum_{ky,kx} k[ky][kx] * x[oy*s+ky-pad][ox*s+kx-pad]
  void corr2d_acc_(const float* x, int ih, int iw, const float* k, float* y, int oh,
                   int ow) const {
    for (int ky = 0; ky < kh_; ++ky) {
      for (int kx = 0; kx < kw_; ++kx) {
        const float kv = k[ky * kw_ + kx];
        if (kv == 0.0f) continue;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride_ + ky - pad_;
          if (iy < 0 || iy >= ih) continue;
          const float* xr = x + static_cast<std::size_t>(iy) * iw;
          float* yr = y + static_cast<std::size_t>(oy) * ow;
          if (stride_ == 1) {
            const int off = kx - pad_;
            const int lo = off < 0 ? -off : 0;
            const int hi = std::min(ow, iw - off);
            const float* xs = xr + off + lo;
            float* ys = yr + lo;
            const int len = hi - lo;
#pragma omp simd
            for (int t = 0; t < len; ++t) ys[t] += kv * xs[t];
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ + kx - pad_;
              if (ix >= 0 && ix < iw) yr[ox] += kv * xr[ix];
            }
          }
        }
      }
    }
  }

  // dk[ky][kx] += sum_{oy,ox} x[oy*s+ky-pad][ox*s+kx-pad] * g[oy][ox]
  void wgrad_acc_(const float* x, int ih, int iw, const float* g, int oh, int ow,
                  float* dk) const {
    for (int ky = 0; ky < kh_; ++ky) {
      for (int kx = 0; kx < kw_; ++kx) {
        float acc = 0.0f;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride_ + ky - pad_;
          if (iy < 0 || iy >= ih) continue;
          const float* xr = x + static_cast<std::size_t>(iy) * iw;
          const float* gr = g + static_cast<std::size_t>(oy) * ow;
          if (stride_ == 1) {
            const int off = kx - pad_;
            const int lo = off < 0 ? -off : 0;
            const int hi = std::min(ow, iw - off);
            const float* xs = xr + off + lo;
            const float* gs = gr + lo;
            const int len = hi - lo;
            float row = 0.0f;
#pragma omp simd reduction(+ : row)
            for (int t = 0; t < len; ++t) row += xs[t] * gs[t];
            acc += row;
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ + kx - pad_;
              if (ix >= 0 && ix < iw) acc += xr[ix] * gr[ox];
            }
          }
        }
        dk[ky * kw_ + kx] += acc;
      }
    }
  }

  // dx[oy*s+ky-pad][ox*s+kx-pad] += k[ky][kx] * g[oy][ox]
  void dgrad_acc_(const float* g, int oh, int ow, const float* k, float* dx, int ih,
                  int iw) const {
    for (int ky = 0; ky < kh_; ++ky) {
      for (int kx = 0; kx < kw_; ++kx) {
        const float kv = k[ky * kw_ + kx];
        if (kv == 0.0f) continue;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride_ + ky - pad_;
          if (iy < 0 || iy >= ih) continue;
          float* dxr = dx + static_cast<std::size_t>(iy) * iw;
          const float* gr = g + static_cast<std::size_t>(oy) * ow;
          if (stride_ == 1) {
            const int off = kx - pad_;
            const int lo = off < 0 ? -off : 0;
            const int hi = std::min(ow, iw - off);
            float* xs = dxr + off + lo;
            const float* gs = gr + lo;
            const int len = hi - lo;
#pragma omp simd
            for (int t = 0; t < len; ++t) xs[t] += kv * gs[t];
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ + kx - pad_;
              if (ix >= 0 && ix < iw) dxr[ix] += kv * gr[ox];
            }
          }
        }
      }
    }
  }

  int in_ = 0, out_ = 0, kh_ = 0, kw_ = 0, stride_ = 1, pad_ = 0;
};

// ---- parameter-free ops ----

inline Tensor relu_forward(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.vec()) v = v > 0.0f ? v : 0.0f;
  return y;
}

inline void relu_backward(const Tensor& y, const Tensor& dy, Tensor& dx) {
  const float* yp = y.data();
  const float* gp = dy.data();
  float* dp = dx.data();
  const std::size_t n = static_cast<std::size_t>(y.numel());
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) dp[i] += yp[i] > 0.0f ? gp[i] : 0.0f;
}

inline Tensor sigmoid_forward(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.vec()) v = 1.0f / (1.0f + std::exp(-v));
  return y;
}

inline void sigmoid_backward(const Tensor& y, const Tensor& dy, Tensor& dx) {
  const float* yp = y.data();
  const float* gp = dy.data();
  float* dp = dx.data();
  const std::size_t n = static_cast<std::size_t>(y.numel());
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) dp[i] += gp[i] * yp[i] * (1.0f - yp[i]);
}

// Max pooling over [N x C x H x W]; remembers argmax positions for backward.
inline Tensor maxpool2d_forward(const Tensor& x, int k, int stride,
                                std::vector<std::int32_t>* argmax) {
  if (x.ndim() != 4) throw ConfigError("maxpool expects NCHW input");
  const int n = x.dim(0), c = x.dim(1), ih = x.dim(2), iw = x.dim(3);
  if (k > ih || k > iw)
    throw ConfigError("pool window " + std::to_string(k) + " larger than input " +
                      std::to_string(ih) + "x" + std::to_string(iw));
  const int oh = (ih - k) / stride + 1, ow = (iw - k) / stride + 1;
  Tensor y({n, c, oh, ow});
  if (argmax) argmax->assign(static_cast<std::size_t>(y.numel()), 0);
  const std::size_t in_plane = static_cast<std::size_t>(ih) * iw;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  for (int b = 0; b < n * c; ++b) {
    const float* xp = x.data() + static_cast<std::size_t>(b) * in_plane;
    float* yp = y.data() + static_cast<std::size_t>(b) * out_plane;
    std::int32_t* ap = argmax ? argmax->data() + static_cast<std::size_t>(b) * out_plane : nullptr;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const int y0 = oy * stride, x0 = ox * stride;
        float best = xp[static_cast<std::size_t>(y0) * iw + x0];
        int best_at = y0 * iw + x0;
        for (int py = 0; py < k; ++py) {
          for (int px = 0; px < k; ++px) {
            const int at = (y0 + py) * iw + (x0 + px);
            if (xp[at] > best) {
              best = xp[at];
              best_at = at;
            }
          }
        }
        yp[static_cast<std::size_t>(oy) * ow + ox] = best;
        if (ap) ap[static_cast<std::size_t>(oy) * ow + ox] = best_at;
      }
    }
  }
  return y;
}

inline void maxpool2d_backward(const Tensor& dy, const std::vector<std::int32_t>& argmax,
                               Tensor& dx) {
  const int n = dy.dim(0), c = dy.dim(1);
  const std::size_t out_plane = static_cast<std::size_t>(dy.dim(2)) * dy.dim(3);
  const std::size_t in_plane = static_cast<std::size_t>(dx.dim(2)) * dx.dim(3);
  for (int b = 0; b < n * c; ++b) {
    const float* gp = dy.data() + static_cast<std::size_t>(b) * out_plane;
    float* dp = dx.data() + static_cast<std::size_t>(b) * in_plane;
    const std::int32_t* ap = argmax.data() + static_cast<std::size_t>(b) * out_plane;
    for (std::size_t e = 0; e < out_plane; ++e) dp[ap[e]] += gp[e];
  }
}

}  // namespace sharp
