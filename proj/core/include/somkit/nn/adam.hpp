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

#include <cstdint>
#include <vector>

#include "somkit/nn/layers.hpp"

namespace somkit::nn {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (lr < 0.0 || beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0 || eps <= 0.0)
      throw ParamError("adam config out of range");
  }
};

/// Adam over a fixed parameter list. Moment tensors are exposed for
/// checkpointing; restoring them plus the step count resumes bit-exactly.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Param<T>*> params, const AdamConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
    cfg.validate();
    for (Param<T>* p : params_) {
      m_.emplace_back(p->value.n, p->value.c, p->value.h, p->value.w);
      v_.emplace_back(p->value.n, p->value.c, p->value.h, p->value.w);
    }
  }

  void step() {
    ++t_;
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T corr1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, static_cast<double>(t_)));
    const T corr2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, static_cast<double>(t_)));
    const T lr = static_cast<T>(cfg_.lr), eps = static_cast<T>(cfg_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& val = params_[i]->value.data;
      auto& grad = params_[i]->grad.data;
      auto& m = m_[i].data;
      auto& v = v_[i].data;
      for (std::size_t k = 0; k < val.size(); ++k) {
        const T g = grad[k];
        m[k] = b1 * m[k] + (T(1) - b1) * g;
        v[k] = b2 * v[k] + (T(1) - b2) * g * g;
        const T mhat = m[k] / corr1;
        const T vhat = v[k] / corr2;
        val[k] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  const std::vector<Param<T>*>& params() const { return params_; }
  Tensor<T>& moment1(std::size_t i) { return m_[i]; }
  Tensor<T>& moment2(std::size_t i) { return v_[i]; }
  std::int64_t steps_taken() const { return t_; }
  void set_steps_taken(std::int64_t t) { t_ = t; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Param<T>*> params_;
  AdamConfig cfg_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::int64_t t_ = 0;
};

}  // namespace somkit::nn
