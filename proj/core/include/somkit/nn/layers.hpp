// Copyright 2026 The somkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "somkit/nn/tensor.hpp"
#include "somkit/rng.hpp"

namespace somkit::nn {

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  void zero_grad() { grad.fill(T(0)); }
};

/// A differentiable layer. forward(x, record=true) pushes the state needed
/// for one backward pass onto an internal stack, so a layer may run several
/// times per training step; backward pops in LIFO order, which means the
/// caller must unwind passes in reverse order of the forwards. Parameter
/// gradients accumulate until zero_grad.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, bool record) = 0;
  virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
  virtual void collect_params(std::vector<Param<T>*>* out) { (void)out; }
  virtual void drop_contexts() {}
};

enum class PadMode { Zero, Reflect };

namespace detail {

// Mirror an index into [0, n) without repeating the edge sample.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace detail

template <typename T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad,
         PadMode pad_mode = PadMode::Zero, bool bias = true)
      : in_ch_(in_ch),
        out_ch_(out_ch),
        k_(kernel),
        stride_(stride),
        pad_(pad),
        pad_mode_(pad_mode),
        has_bias_(bias) {
    if (in_ch < 1 || out_ch < 1 || kernel < 1 || stride < 1 || pad < 0)
      throw ParamError("conv: bad shape arguments");
    w_.name = name + "/w";
    w_.value = Tensor<T>(out_ch, in_ch, kernel, kernel);
    w_.grad = Tensor<T>(out_ch, in_ch, kernel, kernel);
    if (bias) {
      b_.name = name + "/b";
      b_.value = Tensor<T>(out_ch, 1, 1, 1);
      b_.grad = Tensor<T>(out_ch, 1, 1, 1);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    if (x.c != in_ch_) throw ParamError("conv: channel mismatch");
    const int ho = out_extent(x.h), wo = out_extent(x.w);
    if (ho < 1 || wo < 1) throw ParamError("conv: input smaller than kernel");
    Tensor<T> y(x.n, out_ch_, ho, wo);
    const int l = ho * wo;
    const int rows = in_ch_ * k_ * k_;
    detail::Mat<T> cols(rows, l);
    Eigen::Map<const detail::Mat<T>> wm(w_.value.data.data(), out_ch_, rows);
    for (int n = 0; n < x.n; ++n) {
      im2col(x, n, &cols);
      Eigen::Map<detail::Mat<T>> ym(y.plane(n, 0), out_ch_, l);
      ym.noalias() = wm * cols;
      if (has_bias_)
        for (int oc = 0; oc < out_ch_; ++oc) ym.row(oc).array() += b_.value.data[oc];
    }
    if (record) saved_.push_back(x);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    if (saved_.empty()) throw ParamError("conv: backward without a recorded forward");
    const Tensor<T> x = std::move(saved_.back());
    saved_.pop_back();
    const int ho = dy.h, wo = dy.w, l = ho * wo;
    const int rows = in_ch_ * k_ * k_;
    detail::Mat<T> cols(rows, l);
    detail::Mat<T> dcols(rows, l);
    Eigen::Map<const detail::Mat<T>> wm(w_.value.data.data(), out_ch_, rows);
    Eigen::Map<detail::Mat<T>> dwm(w_.grad.data.data(), out_ch_, rows);
    Tensor<T> dx(x.n, x.c, x.h, x.w);
    for (int n = 0; n < x.n; ++n) {
      im2col(x, n, &cols);
      Eigen::Map<const detail::Mat<T>> dym(dy.plane(n, 0), out_ch_, l);
      dwm.noalias() += dym * cols.transpose();
      if (has_bias_) {
        // Serial accumulation keeps the result independent of buffer
        // alignment; Eigen's vectorized redux over an unaligned map splits
        // the sum at an address-dependent offset.
        for (int oc = 0; oc < out_ch_; ++oc) {
          const T* row = dy.plane(n, 0) + static_cast<std::size_t>(oc) * l;
          T acc = T(0);
          for (int i = 0; i < l; ++i) acc += row[i];
          b_.grad.data[oc] += acc;
        }
      }
      dcols.noalias() = wm.transpose() * dym;
      col2im_add(dcols, ho, wo, &dx, n);
    }
    return dx;
  }

  void collect_params(std::vector<Param<T>*>* out) override {
    out->push_back(&w_);
    if (has_bias_) out->push_back(&b_);
  }

  void drop_contexts() override { saved_.clear(); }

  int out_extent(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }

  Param<T> w_;
  Param<T> b_;

 private:
  // Padded input sample at (c, y, x) with y, x in padded coordinates.
  T padded_at(const Tensor<T>& x, int n, int c, int py, int px) const {
    const int iy = py - pad_, ix = px - pad_;
    if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w) return x.at(n, c, iy, ix);
    if (pad_mode_ == PadMode::Zero) return T(0);
    return x.at(n, c, detail::reflect_index(iy, x.h), detail::reflect_index(ix, x.w));
  }

  void im2col(const Tensor<T>& x, int n, detail::Mat<T>* cols) const {
    const int ho = out_extent(x.h), wo = out_extent(x.w);
    for (int c = 0; c < in_ch_; ++c)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          const int r = (c * k_ + ky) * k_ + kx;
          T* dst = cols->data() + static_cast<std::size_t>(r) * ho * wo;
          for (int oy = 0; oy < ho; ++oy) {
            const int py = oy * stride_ + ky;
            const int iy = py - pad_;
            const bool y_in = iy >= 0 && iy < x.h;
            for (int ox = 0; ox < wo; ++ox) {
              const int px = ox * stride_ + kx;
              const int ix = px - pad_;
              if (y_in && ix >= 0 && ix < x.w)
                dst[oy * wo + ox] = x.at(n, c, iy, ix);
              else
                dst[oy * wo + ox] = padded_at(x, n, c, py, px);
            }
          }
        }
  }

  void col2im_add(const detail::Mat<T>& dcols, int ho, int wo, Tensor<T>* dx, int n) const {
    for (int c = 0; c < in_ch_; ++c)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          const int r = (c * k_ + ky) * k_ + kx;
          const T* src = dcols.data() + static_cast<std::size_t>(r) * ho * wo;
          for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
              const T g = src[oy * wo + ox];
              if (g == T(0)) continue;
              int iy = oy * stride_ + ky - pad_;
              int ix = ox * stride_ + kx - pad_;
              if (iy < 0 || iy >= dx->h || ix < 0 || ix >= dx->w) {
                if (pad_mode_ == PadMode::Zero) continue;
                iy = detail::reflect_index(iy, dx->h);
                ix = detail::reflect_index(ix, dx->w);
              }
              dx->at(n, c, iy, ix) += g;
            }
        }
  }

  int in_ch_, out_ch_, k_, stride_, pad_;
  PadMode pad_mode_;
  bool has_bias_;
  std::vector<Tensor<T>> saved_;
};

/// Per-sample, per-channel normalization without learned affine terms.
template <typename T>
class InstanceNorm : public Layer<T> {
 public:
  explicit InstanceNorm(double eps = 1e-5) : eps_(static_cast<T>(eps)) {}

  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    Ctx ctx;
    ctx.xhat = Tensor<T>(x.n, x.c, x.h, x.w);
    ctx.inv_std.resize(static_cast<std::size_t>(x.n) * x.c);
    const int hw = x.h * x.w;
    Tensor<T> y(x.n, x.c, x.h, x.w);
    for (int n = 0; n < x.n; ++n)
      for (int c = 0; c < x.c; ++c) {
        const T* p = x.plane(n, c);
        T mean = T(0);
        for (int i = 0; i < hw; ++i) mean += p[i];
        mean /= static_cast<T>(hw);
        T var = T(0);
        for (int i = 0; i < hw; ++i) {
          const T d = p[i] - mean;
          var += d * d;
        }
        var /= static_cast<T>(hw);
        const T inv = T(1) / std::sqrt(var + eps_);
        T* xh = ctx.xhat.plane(n, c);
        T* yo = y.plane(n, c);
        for (int i = 0; i < hw; ++i) {
          xh[i] = (p[i] - mean) * inv;
          yo[i] = xh[i];
        }
        ctx.inv_std[static_cast<std::size_t>(n) * x.c + c] = inv;
      }
    if (record) saved_.push_back(std::move(ctx));
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    if (saved_.empty()) throw ParamError("instance norm: backward without forward");
    Ctx ctx = std::move(saved_.back());
    saved_.pop_back();
    const int hw = dy.h * dy.w;
    Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
    for (int n = 0; n < dy.n; ++n)
      for (int c = 0; c < dy.c; ++c) {
        const T* g = dy.plane(n, c);
        const T* xh = ctx.xhat.plane(n, c);
        const T inv = ctx.inv_std[static_cast<std::size_t>(n) * dy.c + c];
        T gmean = T(0), gxmean = T(0);
        for (int i = 0; i < hw; ++i) {
          gmean += g[i];
          gxmean += g[i] * xh[i];
        }
        gmean /= static_cast<T>(hw);
        gxmean /= static_cast<T>(hw);
        T* d = dx.plane(n, c);
        for (int i = 0; i < hw; ++i) d[i] = inv * (g[i] - gmean - xh[i] * gxmean);
      }
    return dx;
  }

  void drop_contexts() override { saved_.clear(); }

 private:
  struct Ctx {
    Tensor<T> xhat;
    std::vector<T> inv_std;
  };
  T eps_;
  std::vector<Ctx> saved_;
};

template <typename T>
class ReLU : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    Tensor<T> y = x;
    for (auto& v : y.data) v = v > T(0) ? v : T(0);
    if (record) saved_.push_back(x);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    if (saved_.empty()) throw ParamError("relu: backward without forward");
    Tensor<T> dx = dy;
    const Tensor<T>& x = saved_.back();
    for (std::size_t i = 0; i < dx.data.size(); ++i)
      if (x.data[i] <= T(0)) dx.data[i] = T(0);
    saved_.pop_back();
    return dx;
  }
  void drop_contexts() override { saved_.clear(); }

 private:
  std::vector<Tensor<T>> saved_;
};

template <typename T>
class LeakyReLU : public Layer<T> {
 public:
  explicit LeakyReLU(double slope = 0.2) : slope_(static_cast<T>(slope)) {}
  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    Tensor<T> y = x;
    for (auto& v : y.data)
      if (v < T(0)) v *= slope_;
    if (record) saved_.push_back(x);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    if (saved_.empty()) throw ParamError("leaky relu: backward without forward");
    Tensor<T> dx = dy;
    const Tensor<T>& x = saved_.back();
    for (std::size_t i = 0; i < dx.data.size(); ++i)
      if (x.data[i] < T(0)) dx.data[i] *= slope_;
    saved_.pop_back();
    return dx;
  }
  void drop_contexts() override { saved_.clear(); }

 private:
  T slope_;
  std::vector<Tensor<T>> saved_;
};

template <typename T>
class Tanh : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    Tensor<T> y = x;
    for (auto& v : y.data) v = std::tanh(v);
    if (record) saved_.push_back(y);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    if (saved_.empty()) throw ParamError("tanh: backward without forward");
    Tensor<T> dx = dy;
    const Tensor<T>& y = saved_.back();
    for (std::size_t i = 0; i < dx.data.size(); ++i)
      dx.data[i] *= T(1) - y.data[i] * y.data[i];
    saved_.pop_back();
    return dx;
  }
  void drop_contexts() override { saved_.clear(); }

 private:
  std::vector<Tensor<T>> saved_;
};

template <typename T>
class Sigmoid : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    Tensor<T> y = x;
    for (auto& v : y.data) v = T(1) / (T(1) + std::exp(-v));
    if (record) saved_.push_back(y);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    if (saved_.empty()) throw ParamError("sigmoid: backward without forward");
    Tensor<T> dx = dy;
    const Tensor<T>& y = saved_.back();
    for (std::size_t i = 0; i < dx.data.size(); ++i)
      dx.data[i] *= y.data[i] * (T(1) - y.data[i]);
    saved_.pop_back();
    return dx;
  }
  void drop_contexts() override { saved_.clear(); }

 private:
  std::vector<Tensor<T>> saved_;
};

/// 2x nearest-neighbor upsampling. Stateless; backward sums each 2x2 block.
template <typename T>
class UpsampleNearest2x : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    Tensor<T> y(x.n, x.c, x.h * 2, x.w * 2);
    for (int n = 0; n < x.n; ++n)
      for (int c = 0; c < x.c; ++c) {
        const T* src = x.plane(n, c);
        T* dst = y.plane(n, c);
        for (int iy = 0; iy < x.h; ++iy)
          for (int ix = 0; ix < x.w; ++ix) {
            const T v = src[iy * x.w + ix];
            T* d = dst + (2 * iy) * y.w + 2 * ix;
            d[0] = v;
            d[1] = v;
            d[y.w] = v;
            d[y.w + 1] = v;
          }
      }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
    for (int n = 0; n < dy.n; ++n)
      for (int c = 0; c < dy.c; ++c) {
        const T* src = dy.plane(n, c);
        T* dst = dx.plane(n, c);
        for (int iy = 0; iy < dx.h; ++iy)
          for (int ix = 0; ix < dx.w; ++ix) {
            const T* s = src + (2 * iy) * dy.w + 2 * ix;
            dst[iy * dx.w + ix] = s[0] + s[1] + s[dy.w] + s[dy.w + 1];
          }
      }
    return dx;
  }
};

template <typename T>
class Sequential : public Layer<T> {
 public:
  Sequential() = default;

  Sequential& add(std::unique_ptr<Layer<T>> layer) {
    layers_.push_back(std::move(layer));
    return *this;
  }
  template <typename L, typename... Args>
  Sequential& emplace(Args&&... args) {
    layers_.push_back(std::make_unique<L>(std::forward<Args>(args)...));
    return *this;
  }

  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    Tensor<T> h = x;
    for (auto& l : layers_) h = l->forward(h, record);
    return h;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> g = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }
  void collect_params(std::vector<Param<T>*>* out) override {
    for (auto& l : layers_) l->collect_params(out);
  }
  void drop_contexts() override {
    for (auto& l : layers_) l->drop_contexts();
  }

  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// conv3/norm/relu/conv3/norm plus the identity skip, reflect padded.
template <typename T>
class ResBlock : public Layer<T> {
 public:
  ResBlock(const std::string& name, int ch, bool instance_norm) {
    branch_.template emplace<Conv2d<T>>(name + "/conv1", ch, ch, 3, 1, 1, PadMode::Reflect);
    if (instance_norm) branch_.template emplace<InstanceNorm<T>>();
    branch_.template emplace<ReLU<T>>();
    branch_.template emplace<Conv2d<T>>(name + "/conv2", ch, ch, 3, 1, 1, PadMode::Reflect);
    if (instance_norm) branch_.template emplace<InstanceNorm<T>>();
  }

  Tensor<T> forward(const Tensor<T>& x, bool record) override {
    Tensor<T> y = branch_.forward(x, record);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += x.data[i];
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx = branch_.backward(dy);
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dy.data[i];
    return dx;
  }
  void collect_params(std::vector<Param<T>*>* out) override { branch_.collect_params(out); }
  void drop_contexts() override { branch_.drop_contexts(); }

 private:
  Sequential<T> branch_;
};

/// All conv weights N(0, 0.02), biases zero. The stream is forked per
/// parameter name so insertion order does not matter.
template <typename T>
void init_params(const std::vector<Param<T>*>& params, const rng::Stream& root,
                 double std_dev = 0.02) {
  for (Param<T>* p : params) {
    if (p->name.size() >= 2 && p->name.compare(p->name.size() - 2, 2, "/b") == 0) {
      p->value.fill(T(0));
      continue;
    }
    rng::Stream s = root.fork(p->name);
    for (auto& v : p->value.data) v = static_cast<T>(s.next_gaussian() * std_dev);
  }
}

}  // namespace somkit::nn
