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
#include <string>
#include <utility>
#include <vector>

#include "somkit/common.hpp"
#include "somkit/image.hpp"
#include "somkit/measurement.hpp"
#include "somkit/nn/adam.hpp"
#include "somkit/nn/models.hpp"
#include "somkit/nn/tensor.hpp"
#include "somkit/rng.hpp"

namespace somkit::gan {

enum class LossFamily { LeastSquares, CrossEntropy };
enum class CycleNorm { L2, L1 };

inline const char* loss_family_name(LossFamily f) {
  return f == LossFamily::LeastSquares ? "least_squares" : "cross_entropy";
}

inline LossFamily loss_family_from_name(const std::string& s) {
  if (s == "least_squares") return LossFamily::LeastSquares;
  if (s == "cross_entropy") return LossFamily::CrossEntropy;
  throw ConfigError("unknown loss family: " + s);
}

inline const char* cycle_norm_name(CycleNorm n) { return n == CycleNorm::L2 ? "l2" : "l1"; }

inline CycleNorm cycle_norm_from_name(const std::string& s) {
  if (s == "l2") return CycleNorm::L2;
  if (s == "l1") return CycleNorm::L1;
  throw ConfigError("unknown cycle norm: " + s);
}

/// Loss configuration for the adversarial game. least_squares is the training
/// default; cross_entropy is the literal minimax objective. lambda_cycle
/// multiplies the sum of both reconstruction terms.
struct GanConfig {
  LossFamily family = LossFamily::LeastSquares;
  CycleNorm cycle_norm = CycleNorm::L2;
  double lambda_cycle = 10.0;

  void validate() const {
    if (!std::isfinite(lambda_cycle) || lambda_cycle < 0.0)
      throw ParamError("lambda_cycle must be finite and non-negative");
  }
};

namespace detail {

inline double softplus(double v) {
  return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

inline double sigmoid(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

template <typename T>
void require_finite(const nn::Tensor<T>& t, const char* what) {
  if (!t.finite()) throw DivergenceError(std::string(what) + " contains non-finite values");
}

template <typename T>
void add_into(nn::Tensor<T>& dst, const nn::Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

template <typename T>
nn::Tensor<T> scaled(const nn::Tensor<T>& t, double s) {
  nn::Tensor<T> out = t;
  for (T& v : out.data) v = static_cast<T>(v * s);
  return out;
}

}  // namespace detail

/// A scalar loss with its gradient w.r.t. one input tensor.
template <typename T>
struct LossGrad {
  double value = 0.0;
  nn::Tensor<T> grad;
};

template <typename T>
struct DiscriminatorLoss {
  double value = 0.0;
  nn::Tensor<T> d_real;
  nn::Tensor<T> d_fake;
};

/// The quantity a discriminator minimizes on its raw score maps, with
/// gradients for both inputs. cross_entropy reads scores as logits:
/// -mean log sig(real) - mean log(1 - sig(fake)). least_squares drives raw
/// scores toward 1 on real and 0 on fake, with a 0.5 factor on the sum.
/// Throws DivergenceError when an input contains non-finite values.
template <typename T>
DiscriminatorLoss<T> discriminator_loss(LossFamily family, const nn::Tensor<T>& real,
                                        const nn::Tensor<T>& fake) {
  detail::require_finite(real, "discriminator scores on real images");
  detail::require_finite(fake, "discriminator scores on fake images");
  DiscriminatorLoss<T> out;
  out.d_real = nn::Tensor<T>(real.n, real.c, real.h, real.w);
  out.d_fake = nn::Tensor<T>(fake.n, fake.c, fake.h, fake.w);
  const double nr = static_cast<double>(real.numel());
  const double nf = static_cast<double>(fake.numel());
  if (family == LossFamily::CrossEntropy) {
    for (std::size_t i = 0; i < real.data.size(); ++i) {
      const double r = static_cast<double>(real.data[i]);
      out.value += detail::softplus(-r) / nr;
      out.d_real.data[i] = static_cast<T>((detail::sigmoid(r) - 1.0) / nr);
    }
    for (std::size_t i = 0; i < fake.data.size(); ++i) {
      const double f = static_cast<double>(fake.data[i]);
      out.value += detail::softplus(f) / nf;
      out.d_fake.data[i] = static_cast<T>(detail::sigmoid(f) / nf);
    }
  } else {
    for (std::size_t i = 0; i < real.data.size(); ++i) {
      const double r = static_cast<double>(real.data[i]);
      out.value += 0.5 * (r - 1.0) * (r - 1.0) / nr;
      out.d_real.data[i] = static_cast<T>((r - 1.0) / nr);
    }
    for (std::size_t i = 0; i < fake.data.size(); ++i) {
      const double f = static_cast<double>(fake.data[i]);
      out.value += 0.5 * f * f / nf;
      out.d_fake.data[i] = static_cast<T>(f / nf);
    }
  }
  return out;
}

/// The generators' adversarial term on the discriminator's raw scores for
/// translated images. cross_entropy keeps the minimax form: the value is
/// mean log(1 - sig(fake)) and the generator minimizes it. least_squares
/// minimizes mean (fake - 1)^2.
template <typename T>
LossGrad<T> generator_adversarial_loss(LossFamily family, const nn::Tensor<T>& fake) {
  detail::require_finite(fake, "discriminator scores on fake images");
  LossGrad<T> out;
  out.grad = nn::Tensor<T>(fake.n, fake.c, fake.h, fake.w);
  const double nf = static_cast<double>(fake.numel());
  if (family == LossFamily::CrossEntropy) {
    for (std::size_t i = 0; i < fake.data.size(); ++i) {
      const double f = static_cast<double>(fake.data[i]);
      out.value -= detail::softplus(f) / nf;
      out.grad.data[i] = static_cast<T>(-detail::sigmoid(f) / nf);
    }
  } else {
    for (std::size_t i = 0; i < fake.data.size(); ++i) {
      const double f = static_cast<double>(fake.data[i]);
      out.value += (f - 1.0) * (f - 1.0) / nf;
      out.grad.data[i] = static_cast<T>(2.0 * (f - 1.0) / nf);
    }
  }
  return out;
}

/// The signed adversarial objective on raw discriminator scores, used for
/// logging and regression checks. cross_entropy: mean log sig(real) +
/// mean log(1 - sig(fake)), the quantity the discriminator maximizes.
/// least_squares: the discriminator loss itself.
template <typename T>
double adversarial_objective(LossFamily family, const nn::Tensor<T>& real,
                             const nn::Tensor<T>& fake) {
  const double v = discriminator_loss(family, real, fake).value;
  return family == LossFamily::CrossEntropy ? -v : v;
}

/// One reconstruction penalty: the batch mean of per-image norms of
/// (reconstruction - original). L2 is the Euclidean norm, not its square;
/// L1 is the sum of absolute differences. The gradient is w.r.t. the
/// reconstruction.
template <typename T>
LossGrad<T> cycle_term(CycleNorm norm, const nn::Tensor<T>& rec, const nn::Tensor<T>& orig) {
  if (!rec.same_shape(orig)) throw ParamError("cycle term inputs must share a shape");
  if (rec.n < 1 || rec.numel() == 0) throw ParamError("cycle term needs a non-empty batch");
  detail::require_finite(rec, "cycle reconstruction");
  LossGrad<T> out;
  out.grad = nn::Tensor<T>(rec.n, rec.c, rec.h, rec.w);
  const std::size_t per = rec.numel() / static_cast<std::size_t>(rec.n);
  const double bn = static_cast<double>(rec.n);
  for (int b = 0; b < rec.n; ++b) {
    const std::size_t base = per * static_cast<std::size_t>(b);
    if (norm == CycleNorm::L2) {
      double ss = 0.0;
      for (std::size_t i = 0; i < per; ++i) {
        const double d = static_cast<double>(rec.data[base + i]) -
                         static_cast<double>(orig.data[base + i]);
        ss += d * d;
      }
      const double s = std::sqrt(ss);
      out.value += s / bn;
      if (s > 0.0) {
        for (std::size_t i = 0; i < per; ++i) {
          const double d = static_cast<double>(rec.data[base + i]) -
                           static_cast<double>(orig.data[base + i]);
          out.grad.data[base + i] = static_cast<T>(d / (s * bn));
        }
      }
    } else {
      double sa = 0.0;
      for (std::size_t i = 0; i < per; ++i) {
        const double d = static_cast<double>(rec.data[base + i]) -
                         static_cast<double>(orig.data[base + i]);
        sa += std::abs(d);
        out.grad.data[base + i] = static_cast<T>((d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / bn);
      }
      out.value += sa / bn;
    }
  }
  return out;
}

/// Per-term scalars from one optimization step or loss evaluation. When a
/// non-finite value aborts a step the scalars are zero and finite is false.
struct StepLosses {
  double gen_adv_y = 0.0;
  double gen_adv_x = 0.0;
  double cycle_x = 0.0;
  double cycle_y = 0.0;
  double gen_total = 0.0;
  double disc_y = 0.0;
  double disc_x = 0.0;
  bool finite = true;
};

/// The full translation model. G_x maps the mathematical domain X into the
/// clean measurement domain, the measurement operator turns that output into
/// a simulated measurement, G_y maps measurements back to X, and patch
/// discriminators D_y / D_x score each domain. D_y only ever sees measured
/// images: real measurements, or measure(G_x(x)) on the fake branch; the
/// G_y adversarial branch has no measurement step because its output lives
/// in the clean mathematical domain. With noise disabled the identical graph
/// is a plain CycleGAN, term by term.
template <typename T>
class CycleGan {
 public:
  CycleGan(const nn::GeneratorSpec& gspec, const nn::DiscriminatorSpec& dspec,
           const GanConfig& cfg, const meas::MeasurementConfig& mcfg)
      : cfg_(cfg),
        mcfg_(mcfg),
        g_x_(gspec, "g_x"),
        g_y_(gspec, "g_y"),
        d_x_(dspec, "d_x"),
        d_y_(dspec, "d_y") {
    cfg_.validate();
    mcfg_.validate();
  }

  /// Seeds every parameter from a stream forked per parameter name, so the
  /// result does not depend on construction order.
  void init(const rng::Stream& root) {
    g_x_.init(root);
    g_y_.init(root);
    d_x_.init(root);
    d_y_.init(root);
  }

  nn::Generator<T>& g_x() { return g_x_; }
  nn::Generator<T>& g_y() { return g_y_; }
  nn::Discriminator<T>& d_x() { return d_x_; }
  nn::Discriminator<T>& d_y() { return d_y_; }
  const GanConfig& config() const { return cfg_; }
  const meas::MeasurementConfig& measurement() const { return mcfg_; }

  std::vector<nn::Param<T>*> generator_params() {
    std::vector<nn::Param<T>*> p = g_x_.params();
    std::vector<nn::Param<T>*> q = g_y_.params();
    p.insert(p.end(), q.begin(), q.end());
    return p;
  }

  std::vector<nn::Param<T>*> discriminator_params() {
    std::vector<nn::Param<T>*> p = d_x_.params();
    std::vector<nn::Param<T>*> q = d_y_.params();
    p.insert(p.end(), q.begin(), q.end());
    return p;
  }

  /// Applies the measurement operator to a batch of clean measurement-domain
  /// images: the identity system response plus additive noise drawn from the
  /// stream. The map has gradient 1 per pixel, so backward passes treat it
  /// as a pass-through.
  nn::Tensor<T> measure(nn::Tensor<T> t, rng::Stream stream) const {
    if (mcfg_.adds_noise()) meas::add_noise(t.data.data(), t.data.size(), mcfg_, stream);
    return t;
  }

  /// Generator-phase losses: both adversarial terms plus both cycle terms.
  /// With accumulate_grads the total generator objective is backpropagated
  /// and left in the generator parameters' grad fields; gradients the same
  /// backward pass pushes into the discriminators are cleared. out_fy and
  /// out_fx receive the detached translated batches when non-null. The two
  /// measurement applications draw from noise_root forks "y_hat_noise" and
  /// "y_cycle_noise", so the result is a pure function of the inputs.
  StepLosses generator_pass(const nn::Tensor<T>& x, const nn::Tensor<T>& y,
                            const rng::Stream& noise_root, bool accumulate_grads,
                            nn::Tensor<T>* out_fy = nullptr, nn::Tensor<T>* out_fx = nullptr) {
    const bool rec = accumulate_grads;
    StepLosses L;

    nn::Tensor<T> fy = measure(g_x_.forward(x, rec), noise_root.fork("y_hat_noise"));
    nn::Tensor<T> dyf = d_y_.forward(fy, rec);
    LossGrad<T> gy = generator_adversarial_loss(cfg_.family, dyf);
    nn::Tensor<T> x_rec = g_y_.forward(fy, rec);
    LossGrad<T> cx = cycle_term(cfg_.cycle_norm, x_rec, x);

    nn::Tensor<T> fx = g_y_.forward(y, rec);
    nn::Tensor<T> dxf = d_x_.forward(fx, rec);
    LossGrad<T> gx = generator_adversarial_loss(cfg_.family, dxf);
    nn::Tensor<T> y_rec = measure(g_x_.forward(fx, rec), noise_root.fork("y_cycle_noise"));
    LossGrad<T> cy = cycle_term(cfg_.cycle_norm, y_rec, y);

    L.gen_adv_y = gy.value;
    L.gen_adv_x = gx.value;
    L.cycle_x = cx.value;
    L.cycle_y = cy.value;
    L.gen_total = gy.value + gx.value + cfg_.lambda_cycle * (cx.value + cy.value);
    if (!std::isfinite(L.gen_total)) throw DivergenceError("generator loss is non-finite");

    if (accumulate_grads) {
      nn::Tensor<T> dfx = g_x_.backward(detail::scaled(cy.grad, cfg_.lambda_cycle));
      detail::add_into(dfx, d_x_.backward(gx.grad));
      g_y_.backward(dfx);
      nn::Tensor<T> dfy = g_y_.backward(detail::scaled(cx.grad, cfg_.lambda_cycle));
      detail::add_into(dfy, d_y_.backward(gy.grad));
      g_x_.backward(dfy);
      d_x_.zero_grads();
      d_y_.zero_grads();
    }
    if (out_fy) *out_fy = std::move(fy);
    if (out_fx) *out_fx = std::move(fx);
    return L;
  }

  /// Discriminator-phase losses on real batches and detached fakes. With
  /// accumulate_grads the gradients are left in the discriminator
  /// parameters' grad fields; generator parameters are untouched. Only
  /// disc_y and disc_x are filled in.
  StepLosses discriminator_pass(const nn::Tensor<T>& x, const nn::Tensor<T>& y,
                                const nn::Tensor<T>& fy, const nn::Tensor<T>& fx,
                                bool accumulate_grads) {
    const bool rec = accumulate_grads;
    StepLosses L;
    nn::Tensor<T> dyr = d_y_.forward(y, rec);
    nn::Tensor<T> dyf = d_y_.forward(fy, rec);
    DiscriminatorLoss<T> ly = discriminator_loss(cfg_.family, dyr, dyf);
    nn::Tensor<T> dxr = d_x_.forward(x, rec);
    nn::Tensor<T> dxf = d_x_.forward(fx, rec);
    DiscriminatorLoss<T> lx = discriminator_loss(cfg_.family, dxr, dxf);
    L.disc_y = ly.value;
    L.disc_x = lx.value;
    if (!std::isfinite(ly.value) || !std::isfinite(lx.value))
      throw DivergenceError("discriminator loss is non-finite");
    if (accumulate_grads) {
      d_y_.backward(ly.d_fake);
      d_y_.backward(ly.d_real);
      d_x_.backward(lx.d_fake);
      d_x_.backward(lx.d_real);
    }
    return L;
  }

  /// Overload that recomputes the detached fakes itself, using the same
  /// noise fork labels as generator_pass so both passes score the identical
  /// simulated measurement for a given noise_root.
  StepLosses discriminator_pass(const nn::Tensor<T>& x, const nn::Tensor<T>& y,
                                const rng::Stream& noise_root, bool accumulate_grads) {
    nn::Tensor<T> fy = measure(g_x_.forward(x, false), noise_root.fork("y_hat_noise"));
    nn::Tensor<T> fx = g_y_.forward(y, false);
    return discriminator_pass(x, y, fy, fx, accumulate_grads);
  }

  /// One alternating update: the generators step on the full generator
  /// objective with discriminators frozen, then both discriminators step on
  /// their own losses with generators frozen. gen_opt must own
  /// generator_params() and disc_opt discriminator_params(). A non-finite
  /// loss aborts the step: updates not yet applied are skipped, gradients
  /// and saved activations are cleared, and the losses come back zeroed with
  /// finite=false. The fifth consecutive aborted step rethrows as a hard
  /// DivergenceError.
  StepLosses train_step(const nn::Tensor<T>& x, const nn::Tensor<T>& y, nn::Adam<T>& gen_opt,
                        nn::Adam<T>& disc_opt, const rng::Stream& noise_root) {
    StepLosses L;
    try {
      zero_all_grads();
      nn::Tensor<T> fy, fx;
      L = generator_pass(x, y, noise_root, true, &fy, &fx);
      gen_opt.step();
      g_x_.zero_grads();
      g_y_.zero_grads();
      const StepLosses D = discriminator_pass(x, y, fy, fx, true);
      disc_opt.step();
      d_x_.zero_grads();
      d_y_.zero_grads();
      L.disc_y = D.disc_y;
      L.disc_x = D.disc_x;
    } catch (const DivergenceError& e) {
      drop_all_contexts();
      zero_all_grads();
      ++nonfinite_streak_;
      if (nonfinite_streak_ >= kDivergenceLimit)
        throw DivergenceError("training diverged: " + std::to_string(nonfinite_streak_) +
                              " consecutive steps with non-finite losses (" + e.what() + ")");
      StepLosses bad;
      bad.finite = false;
      return bad;
    }
    nonfinite_streak_ = 0;
    return L;
  }

  /// All per-term losses at the current parameters, with no gradient
  /// accumulation and no updates. Deterministic given noise_root.
  StepLosses eval_losses(const nn::Tensor<T>& x, const nn::Tensor<T>& y,
                         const rng::Stream& noise_root) {
    nn::Tensor<T> fy, fx;
    StepLosses L = generator_pass(x, y, noise_root, false, &fy, &fx);
    const StepLosses D = discriminator_pass(x, y, fy, fx, false);
    L.disc_y = D.disc_y;
    L.disc_x = D.disc_x;
    return L;
  }

  int nonfinite_streak() const { return nonfinite_streak_; }

  void zero_all_grads() {
    g_x_.zero_grads();
    g_y_.zero_grads();
    d_x_.zero_grads();
    d_y_.zero_grads();
  }

  void drop_all_contexts() {
    g_x_.drop_contexts();
    g_y_.drop_contexts();
    d_x_.drop_contexts();
    d_y_.drop_contexts();
  }

 private:
  static constexpr int kDivergenceLimit = 5;

  GanConfig cfg_;
  meas::MeasurementConfig mcfg_;
  nn::Generator<T> g_x_;
  nn::Generator<T> g_y_;
  nn::Discriminator<T> d_x_;
  nn::Discriminator<T> d_y_;
  int nonfinite_streak_ = 0;
};

/// Maps a mathematical-domain image through G_x. The result carries the
/// clean measurement-domain tag: it is not a measurement until the
/// measurement operator is applied.
template <typename T>
Image translate_to_measurement_clean(nn::Generator<T>& g_x, const Image& x) {
  if (x.tag != Domain::X)
    throw ParamError("translate_to_measurement_clean expects a mathematical-domain image");
  Image out = nn::to_image(g_x.forward(nn::from_image<T>(x), false));
  out.tag = Domain::YClean;
  out.provenance = Provenance::Simulated;
  return out;
}

/// Maps a measurement-domain image through G_y into the mathematical domain.
/// Clean generator outputs are rejected: only measured images belong to the
/// measurement domain.
template <typename T>
Image translate_to_mathematical(nn::Generator<T>& g_y, const Image& y) {
  if (y.tag != Domain::Y)
    throw ParamError("translate_to_mathematical expects a measurement-domain image");
  Image out = nn::to_image(g_y.forward(nn::from_image<T>(y), false));
  out.tag = Domain::X;
  out.provenance = Provenance::Simulated;
  return out;
}

}  // namespace somkit::gan
