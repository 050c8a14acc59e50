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

#include "somkit/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <catch2/catch.hpp>

#include "somkit/clb.hpp"
#include "support/tempdir.hpp"

using namespace somkit;
using namespace somkit::train;
using somkit::testing::TempDir;

namespace {

clb::ClbParams tiny_clb() {
  clb::ClbParams p;
  p.mean_clusters = 5.0;
  p.mean_lumps = 3.0;
  p.cluster_spread = 3.0;
  p.shape_beta = 1.5;
  p.length_x = 3.0;
  p.length_y = 1.5;
  p.height = 16;
  p.width = 16;
  return p;
}

meas::MeasurementConfig tiny_meas() {
  meas::MeasurementConfig m;
  m.noise_model = meas::NoiseModel::GaussianAdditive;
  m.noise_std = 0.05;
  return m;
}

struct Corpora {
  std::string x_manifest;
  std::string y_manifest;
};

Corpora make_corpora(const TempDir& dir, int n = 6) {
  data::synthesize_corpus(tiny_clb(), n, 100, std::nullopt, dir.path() / "x");
  data::synthesize_corpus(tiny_clb(), n, 200, tiny_meas(), dir.path() / "y");
  return {(dir.path() / "x" / "manifest.json").string(),
          (dir.path() / "y" / "manifest.json").string()};
}

TrainConfig tiny_config(const Corpora& c) {
  TrainConfig cfg;
  cfg.generator.base_width = 4;
  cfg.generator.downsamplings = 1;
  cfg.generator.res_blocks = 1;
  cfg.discriminator.base_width = 4;
  cfg.discriminator.stride2_layers = 1;
  cfg.measurement = tiny_meas();
  cfg.batch_size = 2;
  cfg.total_steps = 6;
  cfg.checkpoint_every = 3;
  cfg.image_size = 16;
  cfg.x_manifest = c.x_manifest;
  cfg.y_manifest = c.y_manifest;
  return cfg;
}

bool params_equal(std::vector<nn::Param<float>*> a, std::vector<nn::Param<float>*> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i]->name != b[i]->name || a[i]->value.data != b[i]->value.data) return false;
  return true;
}

gan::StepLosses fake_losses(double v) {
  gan::StepLosses L;
  L.gen_adv_y = v;
  L.gen_adv_x = v + 0.1;
  L.cycle_x = v + 0.2;
  L.cycle_y = v + 0.3;
  L.gen_total = v + 0.4;
  L.disc_y = v + 0.5;
  L.disc_x = v + 0.6;
  return L;
}

}  // namespace

TEST_CASE("train config json round trip is exact") {
  TempDir dir("cfg_rt");
  TrainConfig cfg;
  cfg.generator.base_width = 8;
  cfg.generator.downsamplings = 1;
  cfg.generator.res_blocks = 2;
  cfg.generator.near_identity = true;
  cfg.generator.near_identity_scale = 0.05;
  cfg.discriminator.base_width = 8;
  cfg.discriminator.stride2_layers = 2;
  cfg.discriminator.instance_norm = false;
  cfg.loss.family = gan::LossFamily::CrossEntropy;
  cfg.loss.cycle_norm = gan::CycleNorm::L1;
  cfg.loss.lambda_cycle = 5.0;
  cfg.measurement.noise_mean = 0.01;
  cfg.measurement.noise_std = 0.08;
  cfg.measurement.seed_policy = meas::SeedPolicy::Fixed;
  cfg.adam.lr = 1e-3;
  cfg.adam.beta1 = 0.9;
  cfg.adam.beta2 = 0.99;
  cfg.adam.eps = 1e-7;
  cfg.batch_size = 4;
  cfg.total_steps = 100;
  cfg.checkpoint_every = 10;
  cfg.image_size = 32;
  cfg.x_manifest = "a/manifest.json";
  cfg.y_manifest = "b/manifest.json";
  cfg.seeds = {7, 8, 9};

  const auto file = dir.path() / "config.json";
  save_train_config(cfg, file);
  const TrainConfig r = load_train_config(file);

  CHECK(r.generator.base_width == 8);
  CHECK(r.generator.downsamplings == 1);
  CHECK(r.generator.res_blocks == 2);
  CHECK(r.generator.near_identity);
  CHECK(r.generator.near_identity_scale == 0.05);
  CHECK(r.discriminator.base_width == 8);
  CHECK(r.discriminator.stride2_layers == 2);
  CHECK_FALSE(r.discriminator.instance_norm);
  CHECK(r.loss.family == gan::LossFamily::CrossEntropy);
  CHECK(r.loss.cycle_norm == gan::CycleNorm::L1);
  CHECK(r.loss.lambda_cycle == 5.0);
  CHECK(r.measurement.noise_mean == 0.01);
  CHECK(r.measurement.noise_std == 0.08);
  CHECK(r.measurement.seed_policy == meas::SeedPolicy::Fixed);
  CHECK(r.adam.lr == 1e-3);
  CHECK(r.adam.beta1 == 0.9);
  CHECK(r.adam.beta2 == 0.99);
  CHECK(r.adam.eps == 1e-7);
  CHECK(r.batch_size == 4);
  CHECK(r.total_steps == 100);
  CHECK(r.checkpoint_every == 10);
  CHECK(r.image_size == 32);
  CHECK(r.x_manifest == "a/manifest.json");
  CHECK(r.y_manifest == "b/manifest.json");
  CHECK(r.seeds.model_init == 7);
  CHECK(r.seeds.data_shuffle == 8);
  CHECK(r.seeds.noise == 9);
}

TEST_CASE("train config loading rejects unknown keys but tolerates missing ones") {
  TempDir dir("cfg_strict");
  const auto file = dir.path() / "config.json";

  SECTION("top-level typo") {
    std::ofstream(file) << R"({"batch_sizes": 3})";
    CHECK_THROWS_WITH(load_train_config(file), Catch::Contains("batch_sizes"));
  }
  SECTION("nested typo") {
    std::ofstream(file) << R"({"loss": {"lambda": 5.0}})";
    CHECK_THROWS_WITH(load_train_config(file), Catch::Contains("lambda"));
  }
  SECTION("future version") {
    std::ofstream(file) << R"({"format_version": 2})";
    CHECK_THROWS_AS(load_train_config(file), ConfigError);
  }
  SECTION("sparse config falls back to defaults") {
    std::ofstream(file) << R"({"batch_size": 4, "seeds": {"noise": 77}})";
    const TrainConfig r = load_train_config(file);
    CHECK(r.batch_size == 4);
    CHECK(r.seeds.noise == 77);
    CHECK(r.seeds.model_init == TrainSeeds{}.model_init);
    CHECK(r.total_steps == 20000);
    CHECK(r.image_size == 256);
    CHECK(r.adam.lr == 2e-4);
    CHECK(r.generator.base_width == 64);
  }
  SECTION("malformed json") {
    std::ofstream(file) << "{";
    CHECK_THROWS_AS(load_train_config(file), ConfigError);
  }
}

TEST_CASE("train config validation rejects out-of-range settings") {
  TrainConfig ok;
  CHECK_NOTHROW(ok.validate());

  TrainConfig c = ok;
  c.adam.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), ParamError);
  c = ok;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ParamError);
  c = ok;
  c.total_steps = -1;
  CHECK_THROWS_AS(c.validate(), ParamError);
  c = ok;
  c.checkpoint_every = 0;
  CHECK_THROWS_AS(c.validate(), ParamError);
  c = ok;
  c.image_size = 30;
  REQUIRE(c.generator.downsamplings == 2);
  CHECK_THROWS_AS(c.validate(), ParamError);
}

TEST_CASE("checkpoints restore parameters, moments, and step counters bitwise") {
  TempDir dir("ckpt_rt");
  nn::GeneratorSpec g;
  g.base_width = 4;
  g.downsamplings = 1;
  g.res_blocks = 1;
  nn::DiscriminatorSpec d;
  d.base_width = 4;
  d.stride2_layers = 1;

  gan::CycleGan<float> a(g, d, {}, tiny_meas());
  a.init(rng::Stream(11));
  nn::Adam<float> ga(a.generator_params(), {});
  nn::Adam<float> da(a.discriminator_params(), {});
  nn::Tensor<float> x(2, 1, 16, 16), y(2, 1, 16, 16);
  rng::Stream s(5);
  for (auto& v : x.data) v = static_cast<float>(s.next_uniform() * 1.6 - 0.8);
  for (auto& v : y.data) v = static_cast<float>(s.next_uniform() * 1.6 - 0.8);
  a.train_step(x, y, ga, da, rng::Stream(3).fork(0));
  a.train_step(x, y, ga, da, rng::Stream(3).fork(1));

  save_checkpoint(dir.path() / "cp", 57, a, ga, da);

  gan::CycleGan<float> b(g, d, {}, tiny_meas());
  b.init(rng::Stream(99));
  nn::Adam<float> gb(b.generator_params(), {});
  nn::Adam<float> db(b.discriminator_params(), {});
  REQUIRE_FALSE(params_equal(a.generator_params(), b.generator_params()));

  const std::int64_t step = load_checkpoint(dir.path() / "cp", &b, &gb, &db);
  CHECK(step == 57);
  CHECK(params_equal(a.generator_params(), b.generator_params()));
  CHECK(params_equal(a.discriminator_params(), b.discriminator_params()));
  CHECK(gb.steps_taken() == 2);
  CHECK(db.steps_taken() == 2);
  for (std::size_t i = 0; i < a.generator_params().size(); ++i) {
    CHECK(ga.moment1(i).data == gb.moment1(i).data);
    CHECK(ga.moment2(i).data == gb.moment2(i).data);
  }
}

TEST_CASE("checkpoint loading rejects mismatched models and corrupt markers") {
  TempDir dir("ckpt_bad");
  nn::GeneratorSpec g;
  g.base_width = 4;
  g.downsamplings = 1;
  g.res_blocks = 1;
  nn::DiscriminatorSpec d;
  d.base_width = 4;
  d.stride2_layers = 1;
  gan::CycleGan<float> a(g, d, {}, tiny_meas());
  a.init(rng::Stream(1));
  nn::Adam<float> ga(a.generator_params(), {});
  nn::Adam<float> da(a.discriminator_params(), {});
  const auto cp = dir.path() / "cp";
  save_checkpoint(cp, 3, a, ga, da);

  SECTION("wider model") {
    nn::GeneratorSpec g2 = g;
    g2.base_width = 8;
    gan::CycleGan<float> b(g2, d, {}, tiny_meas());
    b.init(rng::Stream(1));
    nn::Adam<float> gb(b.generator_params(), {});
    nn::Adam<float> db(b.discriminator_params(), {});
    CHECK_THROWS_AS(load_checkpoint(cp, &b, &gb, &db), DataError);
  }
  SECTION("missing directory") {
    gan::CycleGan<float> b(g, d, {}, tiny_meas());
    b.init(rng::Stream(1));
    nn::Adam<float> gb(b.generator_params(), {});
    nn::Adam<float> db(b.discriminator_params(), {});
    CHECK_THROWS_AS(load_checkpoint(dir.path() / "nope", &b, &gb, &db), DataError);
  }
  SECTION("truncated marker") {
    std::ofstream(cp / "checkpoint.json") << "{";
    gan::CycleGan<float> b(g, d, {}, tiny_meas());
    b.init(rng::Stream(1));
    nn::Adam<float> gb(b.generator_params(), {});
    nn::Adam<float> db(b.discriminator_params(), {});
    CHECK_THROWS_AS(load_checkpoint(cp, &b, &gb, &db), DataError);
  }
  SECTION("future version") {
    std::ifstream in(cp / "checkpoint.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto pos = text.find("\"format_version\": 1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 19, "\"format_version\": 2");
    std::ofstream(cp / "checkpoint.json") << text;
    gan::CycleGan<float> b(g, d, {}, tiny_meas());
    b.init(rng::Stream(1));
    nn::Adam<float> gb(b.generator_params(), {});
    nn::Adam<float> db(b.discriminator_params(), {});
    CHECK_THROWS_AS(load_checkpoint(cp, &b, &gb, &db), DataError);
  }
}

TEST_CASE("a fresh trainer archives its config and step zero equals initialization") {
  TempDir dir("fresh");
  const Corpora c = make_corpora(dir);
  TrainConfig cfg = tiny_config(c);
  cfg.total_steps = 0;
  const auto run_dir = dir.path() / "run";

  Trainer t(cfg, run_dir);
  CHECK(std::filesystem::exists(run_dir / "config.json"));
  CHECK(std::filesystem::exists(run_dir / "checkpoints" / "step_00000000" / "checkpoint.json"));
  const TrainConfig archived = load_train_config(run_dir / "config.json");
  CHECK(archived.batch_size == cfg.batch_size);
  CHECK(archived.x_manifest == cfg.x_manifest);

  gan::CycleGan<float> ref(cfg.generator, cfg.discriminator, cfg.loss, cfg.measurement);
  ref.init(rng::Stream(cfg.seeds.model_init));
  CHECK(params_equal(t.model().generator_params(), ref.generator_params()));
  CHECK(params_equal(t.model().discriminator_params(), ref.discriminator_params()));

  t.run();
  CHECK(t.step() == 0);
  CHECK_FALSE(std::filesystem::exists(run_dir / "runlog.jsonl"));
}

TEST_CASE("a trainer refuses a directory that already holds a run") {
  TempDir dir("taken");
  const Corpora c = make_corpora(dir);
  TrainConfig cfg = tiny_config(c);
  cfg.total_steps = 0;
  { Trainer t(cfg, dir.path() / "run"); }
  CHECK_THROWS_AS(Trainer(cfg, dir.path() / "run"), DataError);
}

TEST_CASE("interrupted and uninterrupted runs agree") {
  TempDir dir("resume");
  const Corpora c = make_corpora(dir);
  const TrainConfig cfg = tiny_config(c);
  REQUIRE(cfg.total_steps == 6);

  Trainer a(cfg, dir.path() / "run_a");
  a.run();
  CHECK(a.step() == 6);

  {
    Trainer b(cfg, dir.path() / "run_b");
    b.run(4);
    CHECK(b.step() == 4);
    CHECK(std::filesystem::exists(dir.path() / "run_b" / "checkpoints" / "step_00000004"));
  }
  Trainer r = Trainer::resume(dir.path() / "run_b");
  CHECK(r.step() == 4);
  r.run();
  CHECK(r.step() == 6);

  CHECK(params_equal(a.model().generator_params(), r.model().generator_params()));
  CHECK(params_equal(a.model().discriminator_params(), r.model().discriminator_params()));

  const auto la = read_runlog(dir.path() / "run_a" / "runlog.jsonl");
  const auto lb = read_runlog(dir.path() / "run_b" / "runlog.jsonl");
  REQUIRE(la.size() == 6);
  REQUIRE(lb.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(la[i].step == static_cast<std::int64_t>(i + 1));
    CHECK(lb[i].step == la[i].step);
    CHECK(lb[i].losses.gen_total == Approx(la[i].losses.gen_total).margin(1e-6));
    CHECK(lb[i].losses.disc_y == Approx(la[i].losses.disc_y).margin(1e-6));
    CHECK(lb[i].losses.cycle_x == Approx(la[i].losses.cycle_x).margin(1e-6));
  }
}

TEST_CASE("resuming requires a checkpoint and an unlocked directory") {
  TempDir dir("resume_bad");
  const Corpora c = make_corpora(dir);
  TrainConfig cfg = tiny_config(c);
  cfg.total_steps = 0;

  SECTION("no run directory") {
    CHECK_THROWS_AS(Trainer::resume(dir.path() / "missing"), DataError);
  }
  SECTION("locked by a live trainer") {
    Trainer t(cfg, dir.path() / "run");
    CHECK_THROWS_AS(Trainer::resume(dir.path() / "run"), DataError);
  }
  SECTION("lock released on destruction") {
    { Trainer t(cfg, dir.path() / "run"); }
    CHECK_FALSE(std::filesystem::exists(dir.path() / "run" / ".lock"));
    Trainer r = Trainer::resume(dir.path() / "run");
    CHECK(r.step() == 0);
  }
}

TEST_CASE("seed streams are independent") {
  TempDir dir("seeds");
  const Corpora c = make_corpora(dir);
  TrainConfig base = tiny_config(c);
  base.total_steps = 1;

  Trainer t0(base, dir.path() / "r0");
  TrainConfig shuffled = base;
  shuffled.seeds.data_shuffle = 42;
  Trainer t1(shuffled, dir.path() / "r1");
  TrainConfig reinit = base;
  reinit.seeds.model_init = 42;
  Trainer t2(reinit, dir.path() / "r2");
  TrainConfig renoise = base;
  renoise.seeds.noise = 42;
  Trainer t3(renoise, dir.path() / "r3");

  CHECK(params_equal(t0.model().generator_params(), t1.model().generator_params()));
  CHECK(params_equal(t0.model().generator_params(), t3.model().generator_params()));
  CHECK_FALSE(params_equal(t0.model().generator_params(), t2.model().generator_params()));

  t0.run();
  t3.run();
  const auto l0 = read_runlog(dir.path() / "r0" / "runlog.jsonl");
  const auto l3 = read_runlog(dir.path() / "r3" / "runlog.jsonl");
  REQUIRE(l0.size() == 1);
  REQUIRE(l3.size() == 1);
  CHECK(l0[0].losses.gen_adv_y != l3[0].losses.gen_adv_y);
}

TEST_CASE("run logs append strictly increasing steps and reload faithfully") {
  TempDir dir("runlog");
  const auto file = dir.path() / "runlog.jsonl";
  {
    RunLog log(file);
    log.append({1, fake_losses(0.5), 2.5});
    log.append({2, fake_losses(0.25), 3.0});
    CHECK_THROWS_AS(log.append({2, fake_losses(0.1), 1.0}), ParamError);
    CHECK_THROWS_AS(log.append({0, fake_losses(0.1), 1.0}), ParamError);
  }
  auto records = read_runlog(file);
  REQUIRE(records.size() == 2);
  CHECK(records[0].step == 1);
  CHECK(records[0].losses.gen_adv_y == 0.5);
  CHECK(records[0].losses.disc_x == Approx(1.1));
  CHECK(records[0].wall_ms == 2.5);
  CHECK(records[1].step == 2);
  CHECK(records[1].losses.finite);
  {
    RunLog log(file);
    CHECK_THROWS_AS(log.append({1, fake_losses(0.1), 1.0}), ParamError);
    log.append({5, fake_losses(0.1), 1.0});
  }
  records = read_runlog(file);
  REQUIRE(records.size() == 3);
  CHECK(records[2].step == 5);

  std::ofstream(dir.path() / "bad.jsonl") << "not json\n";
  CHECK_THROWS_AS(read_runlog(dir.path() / "bad.jsonl"), DataError);
}

TEST_CASE("training rejects corpora that do not match the config") {
  TempDir dir("mismatch");
  const Corpora c = make_corpora(dir);

  SECTION("swapped domains") {
    TrainConfig cfg = tiny_config(c);
    cfg.x_manifest = c.y_manifest;
    cfg.y_manifest = c.x_manifest;
    Trainer t(cfg, dir.path() / "run");
    CHECK_THROWS_AS(t.run(), DataError);
  }
  SECTION("wrong image size") {
    TrainConfig cfg = tiny_config(c);
    cfg.image_size = 32;
    Trainer t(cfg, dir.path() / "run");
    CHECK_THROWS_AS(t.run(), DataError);
  }
  SECTION("missing manifest paths") {
    TrainConfig cfg = tiny_config(c);
    cfg.x_manifest.clear();
    Trainer t(cfg, dir.path() / "run");
    CHECK_THROWS_AS(t.run(), ConfigError);
  }
}

TEST_CASE("divergent runs abort hard and log the aborted steps") {
  TempDir dir("diverge");
  const Corpora c = make_corpora(dir);
  TrainConfig cfg = tiny_config(c);
  cfg.total_steps = 20;
  cfg.checkpoint_every = 100;
  Trainer t(cfg, dir.path() / "run");

  for (auto* p : t.model().generator_params())
    if (p->name == "g_x/head/w")
      p->value.data[0] = std::numeric_limits<float>::quiet_NaN();

  CHECK_THROWS_AS(t.run(), DivergenceError);
  CHECK(t.step() == 4);
  const auto records = read_runlog(dir.path() / "run" / "runlog.jsonl");
  REQUIRE(records.size() == 4);
  for (const auto& r : records) CHECK_FALSE(r.losses.finite);
}
