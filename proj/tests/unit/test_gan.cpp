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

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include <catch2/catch.hpp>

#include "somkit/gan.hpp"

using namespace somkit;
using namespace somkit::gan;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

nn::Tensor<double> scores(std::vector<double> vals) {
  nn::Tensor<double> t(static_cast<int>(vals.size()), 1, 1, 1);
  for (std::size_t i = 0; i < vals.size(); ++i) t.data[i] = vals[i];
  return t;
}

nn::Tensor<double> random_scores(int n, int h, int w, std::uint64_t seed, double scale = 2.0) {
  nn::Tensor<double> t(n, 1, h, w);
  rng::Stream s(seed);
  for (auto& v : t.data) v = (s.next_uniform() * 2.0 - 1.0) * scale;
  return t;
}

template <typename T>
nn::Tensor<T> random_batch(int n, int h, int w, std::uint64_t seed) {
  nn::Tensor<T> t(n, 1, h, w);
  rng::Stream s(seed);
  for (auto& v : t.data) v = static_cast<T>(s.next_uniform() * 1.6 - 0.8);
  return t;
}

nn::GeneratorSpec tiny_gspec() {
  nn::GeneratorSpec g;
  g.base_width = 4;
  g.downsamplings = 1;
  g.res_blocks = 1;
  return g;
}

nn::DiscriminatorSpec tiny_dspec() {
  nn::DiscriminatorSpec d;
  d.base_width = 4;
  d.stride2_layers = 1;
  return d;
}

meas::MeasurementConfig gaussian_meas(double std_dev) {
  meas::MeasurementConfig m;
  m.noise_model = meas::NoiseModel::GaussianAdditive;
  m.noise_std = std_dev;
  return m;
}

meas::MeasurementConfig clean_meas() {
  meas::MeasurementConfig m;
  m.noise_model = meas::NoiseModel::None;
  return m;
}

template <typename T>
CycleGan<T> make_bundle(const GanConfig& cfg, const meas::MeasurementConfig& mcfg,
                        std::uint64_t seed) {
  CycleGan<T> gan(tiny_gspec(), tiny_dspec(), cfg, mcfg);
  gan.init(rng::Stream(seed));
  return gan;
}

template <typename T>
std::vector<std::vector<T>> snapshot(std::vector<nn::Param<T>*> params) {
  std::vector<std::vector<T>> out;
  for (auto* p : params) out.push_back(p->value.data);
  return out;
}

template <typename T>
bool all_equal(const std::vector<std::vector<T>>& snap, std::vector<nn::Param<T>*> params) {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (snap[i] != params[i]->value.data) return false;
  return true;
}

double mean_of(const nn::Tensor<float>& t) {
  double s = 0.0;
  for (float v : t.data) s += v;
  return s / static_cast<double>(t.numel());
}

}  // namespace

TEST_CASE("cross entropy adversarial objective matches hand computed scalars") {
  const auto real1 = scores({logit(0.8)});
  const auto fake1 = scores({logit(0.3)});
  const double v1 = adversarial_objective(LossFamily::CrossEntropy, real1, fake1);
  CHECK(v1 == Approx(std::log(0.8) + std::log(0.7)).epsilon(1e-12));
  CHECK(v1 == Approx(-0.579818).margin(1e-6));

  const auto real2 = scores({logit(0.9)});
  const auto fake2 = scores({0.0});
  const double v2 = adversarial_objective(LossFamily::CrossEntropy, real2, fake2);
  CHECK(v2 == Approx(std::log(0.9) + std::log(0.5)).epsilon(1e-12));
  CHECK(v2 == Approx(-0.798508).margin(1e-6));
}

TEST_CASE("perfect discriminator limits of the adversarial objective") {
  const double v = adversarial_objective(LossFamily::CrossEntropy, scores({40.0}), scores({-40.0}));
  CHECK(v < 0.0);
  CHECK(v > -1e-10);

  const double ls = adversarial_objective(LossFamily::LeastSquares, scores({1.0}), scores({0.0}));
  CHECK(ls == 0.0);
}

TEST_CASE("least squares discriminator loss matches its closed form") {
  const auto real = random_scores(2, 3, 3, 11);
  const auto fake = random_scores(2, 3, 3, 12);
  const auto l = discriminator_loss(LossFamily::LeastSquares, real, fake);
  double want = 0.0;
  for (double r : real.data) want += 0.5 * (r - 1.0) * (r - 1.0) / real.numel();
  for (double f : fake.data) want += 0.5 * f * f / fake.numel();
  CHECK(l.value == Approx(want).epsilon(1e-12));
}

TEST_CASE("adversarial loss gradients match central differences") {
  for (LossFamily fam : {LossFamily::LeastSquares, LossFamily::CrossEntropy}) {
    auto real = random_scores(2, 2, 3, 21);
    auto fake = random_scores(2, 2, 3, 22);
    const double h = 1e-6;

    const auto dl = discriminator_loss(fam, real, fake);
    for (std::size_t i = 0; i < real.data.size(); ++i) {
      const double keep = real.data[i];
      real.data[i] = keep + h;
      const double up = discriminator_loss(fam, real, fake).value;
      real.data[i] = keep - h;
      const double dn = discriminator_loss(fam, real, fake).value;
      real.data[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      CHECK(dl.d_real.data[i] == Approx(fd).margin(1e-9).epsilon(1e-6));
    }
    for (std::size_t i = 0; i < fake.data.size(); ++i) {
      const double keep = fake.data[i];
      fake.data[i] = keep + h;
      const double up = discriminator_loss(fam, real, fake).value;
      fake.data[i] = keep - h;
      const double dn = discriminator_loss(fam, real, fake).value;
      fake.data[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      CHECK(dl.d_fake.data[i] == Approx(fd).margin(1e-9).epsilon(1e-6));
    }

    const auto gl = generator_adversarial_loss(fam, fake);
    for (std::size_t i = 0; i < fake.data.size(); ++i) {
      const double keep = fake.data[i];
      fake.data[i] = keep + h;
      const double up = generator_adversarial_loss(fam, fake).value;
      fake.data[i] = keep - h;
      const double dn = generator_adversarial_loss(fam, fake).value;
      fake.data[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      CHECK(gl.grad.data[i] == Approx(fd).margin(1e-9).epsilon(1e-6));
    }
  }
}

TEST_CASE("adversarial losses are batch mean linear") {
  const auto real = random_scores(3, 2, 2, 31);
  const auto fake = random_scores(3, 2, 2, 32);
  nn::Tensor<double> real2(6, 1, 2, 2);
  nn::Tensor<double> fake2(6, 1, 2, 2);
  std::copy(real.data.begin(), real.data.end(), real2.data.begin());
  std::copy(real.data.begin(), real.data.end(), real2.data.begin() + real.data.size());
  std::copy(fake.data.begin(), fake.data.end(), fake2.data.begin());
  std::copy(fake.data.begin(), fake.data.end(), fake2.data.begin() + fake.data.size());

  for (LossFamily fam : {LossFamily::LeastSquares, LossFamily::CrossEntropy}) {
    CHECK(adversarial_objective(fam, real2, fake2) ==
          Approx(adversarial_objective(fam, real, fake)).epsilon(1e-12));
    CHECK(generator_adversarial_loss(fam, fake2).value ==
          Approx(generator_adversarial_loss(fam, fake).value).epsilon(1e-12));
  }
}

TEST_CASE("cycle term computes per image norms") {
  nn::Tensor<double> orig(2, 1, 2, 2);
  nn::Tensor<double> rec(2, 1, 2, 2);
  rec.data = {3.0, 4.0, 0.0, 0.0, 1.0, -1.0, 1.0, -1.0};

  const auto l2 = cycle_term(CycleNorm::L2, rec, orig);
  CHECK(l2.value == Approx((5.0 + 2.0) / 2.0).epsilon(1e-12));
  CHECK(l2.grad.data[0] == Approx(3.0 / 5.0 / 2.0).epsilon(1e-12));
  CHECK(l2.grad.data[1] == Approx(4.0 / 5.0 / 2.0).epsilon(1e-12));
  CHECK(l2.grad.data[4] == Approx(1.0 / 2.0 / 2.0).epsilon(1e-12));

  const auto l1 = cycle_term(CycleNorm::L1, rec, orig);
  CHECK(l1.value == Approx((7.0 + 4.0) / 2.0).epsilon(1e-12));
  CHECK(l1.grad.data[0] == Approx(0.5).epsilon(1e-12));
  CHECK(l1.grad.data[5] == Approx(-0.5).epsilon(1e-12));
  CHECK(l1.grad.data[2] == 0.0);

  const auto zero = cycle_term(CycleNorm::L2, orig, orig);
  CHECK(zero.value == 0.0);
  for (double g : zero.grad.data) CHECK(g == 0.0);

  nn::Tensor<double> other(2, 1, 2, 3);
  CHECK_THROWS_AS(cycle_term(CycleNorm::L2, rec, other), ParamError);
}

TEST_CASE("cycle term gradient matches central differences") {
  auto orig = random_scores(2, 3, 3, 41, 0.7);
  auto rec = random_scores(2, 3, 3, 42, 0.7);
  for (std::size_t i = 0; i < rec.data.size(); ++i)
    if (std::abs(rec.data[i] - orig.data[i]) < 0.05) rec.data[i] = orig.data[i] + 0.1;
  const double h = 1e-6;
  for (CycleNorm norm : {CycleNorm::L2, CycleNorm::L1}) {
    const auto l = cycle_term(norm, rec, orig);
    for (std::size_t i = 0; i < rec.data.size(); ++i) {
      const double keep = rec.data[i];
      rec.data[i] = keep + h;
      const double up = cycle_term(norm, rec, orig).value;
      rec.data[i] = keep - h;
      const double dn = cycle_term(norm, rec, orig).value;
      rec.data[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      CHECK(l.grad.data[i] == Approx(fd).margin(1e-8).epsilon(1e-6));
    }
  }
}

TEST_CASE("cycle term on pure noise matches the chi mean") {
  const int n = 64, side = 24;
  const std::size_t per = static_cast<std::size_t>(side) * side;
  const double sigma = 0.05;
  auto orig = random_scores(n, side, side, 51, 0.5);
  auto rec = orig;
  rng::Stream s(52);
  for (auto& v : rec.data) v += sigma * s.next_gaussian();

  const double k = static_cast<double>(per);
  const double chi_mean =
      sigma * std::sqrt(2.0) * std::exp(std::lgamma((k + 1.0) / 2.0) - std::lgamma(k / 2.0));
  const auto l = cycle_term(CycleNorm::L2, rec, orig);
  CHECK(l.value == Approx(chi_mean).epsilon(0.015));
}

TEST_CASE("gan name conversions round trip") {
  for (LossFamily f : {LossFamily::LeastSquares, LossFamily::CrossEntropy})
    CHECK(loss_family_from_name(loss_family_name(f)) == f);
  for (CycleNorm c : {CycleNorm::L2, CycleNorm::L1})
    CHECK(cycle_norm_from_name(cycle_norm_name(c)) == c);
  CHECK_THROWS_AS(loss_family_from_name("hinge"), ConfigError);
  CHECK_THROWS_AS(cycle_norm_from_name("linf"), ConfigError);

  GanConfig cfg;
  CHECK(cfg.family == LossFamily::LeastSquares);
  CHECK(cfg.cycle_norm == CycleNorm::L2);
  CHECK(cfg.lambda_cycle == 10.0);
  CHECK_NOTHROW(cfg.validate());
  cfg.lambda_cycle = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ParamError);
}

TEST_CASE("train step with zero learning rate leaves parameters unchanged") {
  auto gan = make_bundle<float>(GanConfig{}, gaussian_meas(0.05), 61);
  nn::AdamConfig frozen;
  frozen.lr = 0.0;
  nn::Adam<float> gen_opt(gan.generator_params(), frozen);
  nn::Adam<float> disc_opt(gan.discriminator_params(), frozen);

  const auto gsnap = snapshot(gan.generator_params());
  const auto dsnap = snapshot(gan.discriminator_params());
  const auto x = random_batch<float>(2, 12, 12, 62);
  const auto y = random_batch<float>(2, 12, 12, 63);
  const auto L = gan.train_step(x, y, gen_opt, disc_opt, rng::Stream(64));

  CHECK(L.finite);
  CHECK(L.cycle_x > 0.0);
  CHECK(L.cycle_y > 0.0);
  CHECK(std::isfinite(L.gen_total));
  CHECK(all_equal(gsnap, gan.generator_params()));
  CHECK(all_equal(dsnap, gan.discriminator_params()));
}

TEST_CASE("optimizer phases update only their own networks") {
  nn::AdamConfig live;
  nn::AdamConfig frozen;
  frozen.lr = 0.0;
  const auto x = random_batch<float>(2, 12, 12, 71);
  const auto y = random_batch<float>(2, 12, 12, 72);

  auto gan1 = make_bundle<float>(GanConfig{}, gaussian_meas(0.05), 73);
  nn::Adam<float> g1(gan1.generator_params(), frozen);
  nn::Adam<float> d1(gan1.discriminator_params(), live);
  gan1.train_step(x, y, g1, d1, rng::Stream(74));
  CHECK(all_equal(snapshot(gan1.generator_params()), gan1.generator_params()));

  auto gan2 = make_bundle<float>(GanConfig{}, gaussian_meas(0.05), 73);
  const auto gsnap = snapshot(gan2.generator_params());
  const auto dsnap = snapshot(gan2.discriminator_params());
  nn::Adam<float> g2(gan2.generator_params(), live);
  nn::Adam<float> d2(gan2.discriminator_params(), frozen);
  gan2.train_step(x, y, g2, d2, rng::Stream(74));
  CHECK_FALSE(all_equal(gsnap, gan2.generator_params()));
  CHECK(all_equal(dsnap, gan2.discriminator_params()));

  auto gan3 = make_bundle<float>(GanConfig{}, gaussian_meas(0.05), 73);
  nn::Adam<float> g3(gan3.generator_params(), live);
  nn::Adam<float> d3(gan3.discriminator_params(), live);
  gan3.train_step(x, y, g3, d3, rng::Stream(74));
  CHECK_FALSE(all_equal(dsnap, gan3.discriminator_params()));
}

TEST_CASE("train step is a pure function of seeds") {
  const auto x = random_batch<float>(2, 12, 12, 81);
  const auto y = random_batch<float>(2, 12, 12, 82);

  auto run = [&](std::vector<StepLosses>& hist) {
    auto gan = make_bundle<float>(GanConfig{}, gaussian_meas(0.05), 83);
    nn::Adam<float> g(gan.generator_params(), nn::AdamConfig{});
    nn::Adam<float> d(gan.discriminator_params(), nn::AdamConfig{});
    for (int step = 0; step < 3; ++step)
      hist.push_back(gan.train_step(x, y, g, d, rng::Stream(84).fork(step)));
    return snapshot(gan.generator_params());
  };

  std::vector<StepLosses> h1, h2;
  const auto p1 = run(h1);
  const auto p2 = run(h2);
  REQUIRE(h1.size() == h2.size());
  for (std::size_t i = 0; i < h1.size(); ++i) {
    CHECK(h1[i].gen_total == h2[i].gen_total);
    CHECK(h1[i].disc_y == h2[i].disc_y);
    CHECK(h1[i].disc_x == h2[i].disc_x);
  }
  CHECK(p1 == p2);
}

TEST_CASE("generator gradients of the total objective match finite differences") {
  GanConfig cfg;
  cfg.lambda_cycle = 10.0;
  auto gan = make_bundle<double>(cfg, gaussian_meas(0.1), 91);
  const auto x = random_batch<double>(1, 8, 8, 92);
  const auto y = random_batch<double>(1, 8, 8, 93);
  const rng::Stream noise(94);

  gan.zero_all_grads();
  gan.generator_pass(x, y, noise, true);

  const double h = 1e-6;
  int checked = 0;
  for (auto* p : gan.generator_params()) {
    for (std::size_t i = 0; i < p->value.data.size(); i += 97) {
      const double keep = p->value.data[i];
      p->value.data[i] = keep + h;
      const double up = gan.generator_pass(x, y, noise, false).gen_total;
      p->value.data[i] = keep - h;
      const double dn = gan.generator_pass(x, y, noise, false).gen_total;
      p->value.data[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double a = p->grad.data[i];
      const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-3});
      INFO(p->name << "[" << i << "] analytic " << a << " fd " << fd);
      CHECK(err < 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("discriminator phase gradients match finite differences") {
  auto gan = make_bundle<double>(GanConfig{}, gaussian_meas(0.1), 101);
  const auto x = random_batch<double>(1, 8, 8, 102);
  const auto y = random_batch<double>(1, 8, 8, 103);
  const rng::Stream noise(104);
  nn::Tensor<double> fy, fx;
  gan.generator_pass(x, y, noise, false, &fy, &fx);

  gan.zero_all_grads();
  gan.discriminator_pass(x, y, fy, fx, true);

  const double h = 1e-6;
  int checked = 0;
  for (auto* p : gan.discriminator_params()) {
    for (std::size_t i = 0; i < p->value.data.size(); i += 53) {
      const double keep = p->value.data[i];
      p->value.data[i] = keep + h;
      const auto up = gan.discriminator_pass(x, y, fy, fx, false);
      p->value.data[i] = keep - h;
      const auto dn = gan.discriminator_pass(x, y, fy, fx, false);
      p->value.data[i] = keep;
      const double fd = ((up.disc_y + up.disc_x) - (dn.disc_y + dn.disc_x)) / (2.0 * h);
      const double a = p->grad.data[i];
      const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-3});
      INFO(p->name << "[" << i << "] analytic " << a << " fd " << fd);
      CHECK(err < 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 30);
}

TEST_CASE("the fake measurement branch carries noise into the discriminator") {
  const auto x = random_batch<float>(2, 12, 12, 111);
  const auto y = random_batch<float>(2, 12, 12, 112);

  auto noisy = make_bundle<float>(GanConfig{}, gaussian_meas(0.5), 113);
  const auto L = noisy.eval_losses(x, y, rng::Stream(114));
  const auto clean_fake = noisy.g_x().forward(x, false);
  const auto clean_scores = noisy.d_y().forward(clean_fake, false);
  const double clean_adv = generator_adversarial_loss(noisy.config().family, clean_scores).value;
  CHECK(std::abs(L.gen_adv_y - clean_adv) > 1e-4);

  auto plain = make_bundle<float>(GanConfig{}, clean_meas(), 113);
  const auto P = plain.eval_losses(x, y, rng::Stream(114));
  const auto pf = plain.g_x().forward(x, false);
  const auto ps = plain.d_y().forward(pf, false);
  CHECK(P.gen_adv_y == Approx(generator_adversarial_loss(plain.config().family, ps).value)
                           .epsilon(1e-12));
  const auto prec = plain.g_y().forward(pf, false);
  CHECK(P.cycle_x ==
        Approx(cycle_term(plain.config().cycle_norm, prec, x).value).epsilon(1e-12));
  const auto dr = plain.d_y().forward(y, false);
  const auto df = plain.d_y().forward(pf, false);
  CHECK(P.disc_y ==
        Approx(discriminator_loss(plain.config().family, dr, df).value).epsilon(1e-12));

  const auto P2 = plain.eval_losses(x, y, rng::Stream(999));
  CHECK(P.gen_total == P2.gen_total);
  CHECK(P.cycle_y == P2.cycle_y);
}

TEST_CASE("lambda scales only the cycle penalty") {
  const auto x = random_batch<float>(2, 12, 12, 121);
  const auto y = random_batch<float>(2, 12, 12, 122);

  GanConfig free_cfg;
  free_cfg.lambda_cycle = 0.0;
  auto gan0 = make_bundle<float>(free_cfg, gaussian_meas(0.05), 123);
  GanConfig tied_cfg;
  tied_cfg.lambda_cycle = 10.0;
  auto gan10 = make_bundle<float>(tied_cfg, gaussian_meas(0.05), 123);

  const auto L0 = gan0.eval_losses(x, y, rng::Stream(124));
  const auto L10 = gan10.eval_losses(x, y, rng::Stream(124));
  CHECK(L0.gen_adv_y == L10.gen_adv_y);
  CHECK(L0.cycle_x == L10.cycle_x);
  CHECK(L0.gen_total == Approx(L0.gen_adv_y + L0.gen_adv_x).epsilon(1e-12));
  CHECK(L10.gen_total ==
        Approx(L10.gen_adv_y + L10.gen_adv_x + 10.0 * (L10.cycle_x + L10.cycle_y))
            .epsilon(1e-12));
}

TEST_CASE("translate wrappers carry domain tags") {
  auto gan = make_bundle<float>(GanConfig{}, gaussian_meas(0.05), 131);

  Image x(12, 12);
  rng::Stream s(132);
  for (auto& v : x.px) v = static_cast<float>(s.next_uniform() * 1.6 - 0.8);
  x.tag = Domain::X;

  const Image yc = translate_to_measurement_clean(gan.g_x(), x);
  CHECK(yc.tag == Domain::YClean);
  CHECK(yc.h == 12);
  CHECK(yc.w == 12);
  CHECK(yc.provenance == Provenance::Simulated);
  for (float v : yc.px) {
    CHECK(v >= -1.0f);
    CHECK(v <= 1.0f);
  }
  const Image yc2 = translate_to_measurement_clean(gan.g_x(), x);
  CHECK(yc.px == yc2.px);

  CHECK_THROWS_AS(translate_to_mathematical(gan.g_y(), yc), ParamError);

  Image y = yc;
  y.tag = Domain::Y;
  const Image xr = translate_to_mathematical(gan.g_y(), y);
  CHECK(xr.tag == Domain::X);

  Image wrong = x;
  wrong.tag = Domain::Y;
  CHECK_THROWS_AS(translate_to_measurement_clean(gan.g_x(), wrong), ParamError);
}

TEST_CASE("diverged training surfaces a hard error after five failed steps") {
  auto gan = make_bundle<float>(GanConfig{}, gaussian_meas(0.05), 141);
  nn::Adam<float> g(gan.generator_params(), nn::AdamConfig{});
  nn::Adam<float> d(gan.discriminator_params(), nn::AdamConfig{});
  const auto x = random_batch<float>(1, 12, 12, 142);
  const auto y = random_batch<float>(1, 12, 12, 143);

  for (auto* p : gan.generator_params())
    if (p->name == "g_x/head/w") p->value.data[0] = std::numeric_limits<float>::quiet_NaN();
  const auto dsnap = snapshot(gan.discriminator_params());

  for (int k = 1; k <= 4; ++k) {
    const auto L = gan.train_step(x, y, g, d, rng::Stream(144).fork(k));
    CHECK_FALSE(L.finite);
    CHECK(L.gen_total == 0.0);
    CHECK(gan.nonfinite_streak() == k);
  }
  CHECK(g.steps_taken() == 0);
  CHECK(d.steps_taken() == 0);
  CHECK(all_equal(dsnap, gan.discriminator_params()));
  CHECK_THROWS_AS(gan.train_step(x, y, g, d, rng::Stream(144).fork(5)), DivergenceError);

  CHECK_THROWS_AS(
      discriminator_loss(LossFamily::LeastSquares,
                         scores({std::numeric_limits<double>::quiet_NaN()}), scores({0.0})),
      DivergenceError);
}

TEST_CASE("a recovered loss resets the divergence streak") {
  auto gan = make_bundle<float>(GanConfig{}, gaussian_meas(0.05), 151);
  nn::Adam<float> g(gan.generator_params(), nn::AdamConfig{});
  nn::Adam<float> d(gan.discriminator_params(), nn::AdamConfig{});
  const auto x = random_batch<float>(1, 12, 12, 152);
  const auto y = random_batch<float>(1, 12, 12, 153);

  nn::Param<float>* poisoned = nullptr;
  for (auto* p : gan.generator_params())
    if (p->name == "g_x/head/w") poisoned = p;
  REQUIRE(poisoned != nullptr);
  const float keep = poisoned->value.data[0];
  poisoned->value.data[0] = std::numeric_limits<float>::quiet_NaN();
  for (int k = 1; k <= 3; ++k) gan.train_step(x, y, g, d, rng::Stream(154).fork(k));
  CHECK(gan.nonfinite_streak() == 3);

  poisoned->value.data[0] = keep;
  const auto L = gan.train_step(x, y, g, d, rng::Stream(154).fork(4));
  CHECK(L.finite);
  CHECK(gan.nonfinite_streak() == 0);
  CHECK(g.steps_taken() == 1);
}

TEST_CASE("toy translation problem converges") {
  nn::GeneratorSpec gs = tiny_gspec();
  nn::DiscriminatorSpec ds = tiny_dspec();
  GanConfig cfg;
  CycleGan<float> gan(gs, ds, cfg, clean_meas());
  gan.init(rng::Stream(161));

  nn::AdamConfig ac;
  ac.lr = 1e-2;
  nn::Adam<float> g(gan.generator_params(), ac);
  nn::Adam<float> d(gan.discriminator_params(), ac);

  nn::Tensor<float> x(2, 1, 8, 8, -0.5f);
  nn::Tensor<float> y(2, 1, 8, 8, 0.5f);
  for (int step = 0; step < 200; ++step)
    gan.train_step(x, y, g, d, rng::Stream(162).fork(step));

  const double out_mean = mean_of(gan.g_x().forward(x, false));
  INFO("mean of translated outputs " << out_mean);
  CHECK(std::abs(out_mean - 0.5) < 0.2);
}
