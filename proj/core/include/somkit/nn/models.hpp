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

#include <algorithm>
#include <string>
#include <vector>

#include "somkit/nn/layers.hpp"

namespace somkit::nn {

/// Residual encoder-decoder translator: a wide stride-1 stem, `downsamplings`
/// stride-2 stages, `res_blocks` residual blocks, mirrored nearest-neighbor
/// upsampling stages, a stride-1 head, and tanh. Output pixels lie in [-1, 1].
struct GeneratorSpec {
  int channels = 1;
  int base_width = 64;
  int downsamplings = 2;
  int res_blocks = 9;
  bool instance_norm = true;

  /// Starts the map near the identity: out = clamp(x + scale * stack(x)) with
  /// the head conv damped at init. Off by default.
  bool near_identity = false;
  double near_identity_scale = 0.1;

  void validate() const {
    if (channels < 1 || base_width < 1 || downsamplings < 1 || downsamplings > 3 ||
        res_blocks < 0 || res_blocks > 24)
      throw ParamError("generator spec out of range");
    if (near_identity && (near_identity_scale <= 0.0 || near_identity_scale > 0.2))
      throw ParamError("near-identity scale must be in (0, 0.2]");
  }
};

template <typename T>
class Generator {
 public:
  explicit Generator(const GeneratorSpec& spec, const std::string& name = "g")
      : spec_(spec), name_(name) {
    spec.validate();
    core_.template emplace<Conv2d<T>>(name + "/stem", spec.channels, spec.base_width, 7, 1, 3,
                                      PadMode::Reflect);
    if (spec.instance_norm) core_.template emplace<InstanceNorm<T>>();
    core_.template emplace<ReLU<T>>();
    int width = spec.base_width;
    for (int d = 0; d < spec.downsamplings; ++d) {
      core_.template emplace<Conv2d<T>>(name + "/down" + std::to_string(d), width, width * 2, 3,
                                        2, 1, PadMode::Zero);
      if (spec.instance_norm) core_.template emplace<InstanceNorm<T>>();
      core_.template emplace<ReLU<T>>();
      width *= 2;
    }
    for (int r = 0; r < spec.res_blocks; ++r)
      core_.template emplace<ResBlock<T>>(name + "/res" + std::to_string(r), width,
                                          spec.instance_norm);
    for (int d = 0; d < spec.downsamplings; ++d) {
      core_.template emplace<UpsampleNearest2x<T>>();
      core_.template emplace<Conv2d<T>>(name + "/up" + std::to_string(d), width, width / 2, 3, 1,
                                        1, PadMode::Zero);
      if (spec.instance_norm) core_.template emplace<InstanceNorm<T>>();
      core_.template emplace<ReLU<T>>();
      width /= 2;
    }
    core_.template emplace<Conv2d<T>>(name + "/head", width, spec.channels, 7, 1, 3,
                                      PadMode::Reflect);
    core_.template emplace<Tanh<T>>();
  }

  Tensor<T> forward(const Tensor<T>& x, bool record) {
    Tensor<T> h = core_.forward(x, record);
    if (!spec_.near_identity) return h;
    const T s = static_cast<T>(spec_.near_identity_scale);
    Tensor<T> y(x.n, x.c, x.h, x.w);
    Tensor<T> mask(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < y.data.size(); ++i) {
      const T z = x.data[i] + s * h.data[i];
      const bool inside = z >= T(-1) && z <= T(1);
      y.data[i] = inside ? z : (z < T(-1) ? T(-1) : T(1));
      mask.data[i] = inside ? T(1) : T(0);
    }
    if (record) masks_.push_back(std::move(mask));
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (!spec_.near_identity) return core_.backward(dy);
    if (masks_.empty()) throw ParamError("generator: backward without forward");
    const Tensor<T> mask = std::move(masks_.back());
    masks_.pop_back();
    const T s = static_cast<T>(spec_.near_identity_scale);
    Tensor<T> dz = dy;
    for (std::size_t i = 0; i < dz.data.size(); ++i) dz.data[i] *= mask.data[i];
    Tensor<T> dh = dz;
    for (auto& v : dh.data) v *= s;
    Tensor<T> dx = core_.backward(dh);
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dz.data[i];
    return dx;
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    core_.collect_params(&out);
    return out;
  }

  void init(const rng::Stream& root) {
    init_params(params(), root);
    if (spec_.near_identity) {
      for (Param<T>* p : params())
        if (p->name == name_ + "/head/w")
          for (auto& v : p->value.data) v *= T(0.1);
    }
  }

  void zero_grads() {
    for (Param<T>* p : params()) p->zero_grad();
  }
  void drop_contexts() {
    core_.drop_contexts();
    masks_.clear();
  }

  const GeneratorSpec& spec() const { return spec_; }
  const std::string& name() const { return name_; }

 private:
  GeneratorSpec spec_;
  std::string name_;
  Sequential<T> core_;
  std::vector<Tensor<T>> masks_;
};

/// Patch discriminator: stride-2 conv/leaky-relu blocks with width doubling
/// (capped at 8x), then two stride-1 convs down to one logit channel. The
/// output is a logit map, one value per receptive-field patch.
struct DiscriminatorSpec {
  int channels = 1;
  int base_width = 64;
  int stride2_layers = 3;
  bool instance_norm = true;

  void validate() const {
    if (channels < 1 || base_width < 1 || stride2_layers < 1 || stride2_layers > 5)
      throw ParamError("discriminator spec out of range");
  }
};

template <typename T>
class Discriminator {
 public:
  explicit Discriminator(const DiscriminatorSpec& spec, const std::string& name = "d")
      : spec_(spec) {
    spec.validate();
    int width = spec.base_width;
    net_.template emplace<Conv2d<T>>(name + "/in", spec.channels, width, 4, 2, 1, PadMode::Zero);
    net_.template emplace<LeakyReLU<T>>(0.2);
    for (int i = 1; i < spec.stride2_layers; ++i) {
      const int next = std::min(width * 2, spec.base_width * 8);
      net_.template emplace<Conv2d<T>>(name + "/mid" + std::to_string(i), width, next, 4, 2, 1,
                                       PadMode::Zero);
      if (spec.instance_norm) net_.template emplace<InstanceNorm<T>>();
      net_.template emplace<LeakyReLU<T>>(0.2);
      width = next;
    }
    const int last = std::min(width * 2, spec.base_width * 8);
    net_.template emplace<Conv2d<T>>(name + "/pre", width, last, 4, 1, 1, PadMode::Zero);
    if (spec.instance_norm) net_.template emplace<InstanceNorm<T>>();
    net_.template emplace<LeakyReLU<T>>(0.2);
    net_.template emplace<Conv2d<T>>(name + "/out", last, 1, 4, 1, 1, PadMode::Zero);
  }

  Tensor<T> forward(const Tensor<T>& x, bool record) { return net_.forward(x, record); }
  Tensor<T> backward(const Tensor<T>& dy) { return net_.backward(dy); }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    net_.collect_params(&out);
    return out;
  }
  void init(const rng::Stream& root) { init_params(params(), root); }
  void zero_grads() {
    for (Param<T>* p : params()) p->zero_grad();
  }
  void drop_contexts() { net_.drop_contexts(); }

  const DiscriminatorSpec& spec() const { return spec_; }

 private:
  DiscriminatorSpec spec_;
  Sequential<T> net_;
};

}  // namespace somkit::nn
