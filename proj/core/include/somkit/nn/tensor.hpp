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

#include <cmath>
#include <cstddef>
#include <vector>

#include "somkit/common.hpp"
#include "somkit/image.hpp"

namespace somkit::nn {

/// Dense NCHW tensor. T is float in training and double in the finite
/// difference gradient checks.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t numel() const { return data.size(); }
  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  T& at(int in, int ic, int iy, int ix) {
    return data[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
  }
  T at(int in, int ic, int iy, int ix) const {
    return data[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
  }

  T* plane(int in, int ic) { return data.data() + (static_cast<std::size_t>(in) * c + ic) * h * w; }
  const T* plane(int in, int ic) const {
    return data.data() + (static_cast<std::size_t>(in) * c + ic) * h * w;
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

template <typename T>
Tensor<T> from_image(const Image& img) {
  Tensor<T> t(1, 1, img.h, img.w);
  for (std::size_t i = 0; i < img.px.size(); ++i) t.data[i] = static_cast<T>(img.px[i]);
  return t;
}

template <typename T>
Image to_image(const Tensor<T>& t, int batch_index = 0) {
  if (t.c != 1) throw ParamError("to_image expects a single-channel tensor");
  Image img(t.h, t.w);
  const T* p = t.plane(batch_index, 0);
  for (std::size_t i = 0; i < img.px.size(); ++i) img.px[i] = static_cast<float>(p[i]);
  return img;
}

/// Stacks single-channel images into one batch tensor.
template <typename T>
Tensor<T> batch_from_images(const std::vector<const Image*>& imgs) {
  if (imgs.empty()) throw ParamError("empty batch");
  Tensor<T> t(static_cast<int>(imgs.size()), 1, imgs[0]->h, imgs[0]->w);
  for (std::size_t b = 0; b < imgs.size(); ++b) {
    if (imgs[b]->h != t.h || imgs[b]->w != t.w) throw ParamError("batch size mismatch");
    T* dst = t.plane(static_cast<int>(b), 0);
    for (std::size_t i = 0; i < imgs[b]->px.size(); ++i) dst[i] = static_cast<T>(imgs[b]->px[i]);
  }
  return t;
}

}  // namespace somkit::nn
