// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <thread>

#include "core/errors.hpp"
#include "core/pipeline.hpp"
#include "core/taskgen.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace clfake;
using namespace clfake::pipeline;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("clfake_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

checkpoint::Checkpoint tiny_ckpt(std::uint64_t seed) {
  checkpoint::Checkpoint c;
  c.spec = nn::ModelSpec{{kPatchPixels, 2}};
  c.params = nn::init_params(c.spec, seed);
  c.seed = seed;
  return c;
}

harness::RunConfig tiny_run() {
  harness::RunConfig run;
  run.max_epochs = 3;
  run.patience = 2;
  run.batch_size = 16;
  run.lr_initial = 0.02;
  return run;
}

std::vector<spectrum::Features> features_of(const std::vector<taskgen::Patch>& patches) {
  std::vector<spectrum::Features> out;
  for (const auto& p : patches) out.push_back(extract_features(p));
  return out;
}

}  // namespace

TEST_CASE("model registry") {
  ModelRegistry reg;
  CHECK(reg.active_version() == 0);
  CHECK(reg.active() == nullptr);
  const auto v1 = reg.register_checkpoint(tiny_ckpt(1), {"transfer", {"a"}, 0, {}});
  const auto v2 = reg.register_checkpoint(tiny_ckpt(2), {"kd", {"b"}, 1, {}});
  CHECK(v1 == 1);
  CHECK(v2 == 2);
  CHECK(reg.active_version() == 0);  // registering does not activate
  reg.activate(2);
  reg.rollback(1);
  CHECK(reg.active_version() == 1);
  const auto v3 = reg.register_checkpoint(tiny_ckpt(3), {"kd", {"c"}, reg.active_version(), {}});
  CHECK(v3 == 3);
  CHECK(reg.entry(3).metadata.parent_version == 1);
  CHECK_FALSE(reg.entry(3).metadata.timestamp.empty());
  reg.activate(1);  // already active: no-op
  CHECK(reg.active_version() == 1);
  CHECK_THROWS_AS(reg.activate(9), NotFoundError);
  CHECK_THROWS_AS(reg.entry(0), NotFoundError);
  CHECK(reg.size() == 3);
  CHECK(reg.active()->params.bit_identical(tiny_ckpt(1).params));
  CHECK(reg.entry(2).checksum == tiny_ckpt(2).params.checksum());

  auto bad = tiny_ckpt(4);
  bad.params[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(reg.register_checkpoint(bad, {}), ValidationError);

  ModelRegistry moved = std::move(reg);
  CHECK(moved.size() == 3);
  CHECK(moved.active_version() == 1);
}

TEST_CASE("registry persistence") {
  const auto dir = scratch("registry");
  {
    ModelRegistry reg(dir);
    reg.register_checkpoint(tiny_ckpt(1), {"transfer", {"a"}, 0, {}});
    reg.register_checkpoint(tiny_ckpt(2), {"ewc", {"b"}, 1, {}});
    reg.activate(2);
    CHECK_THROWS_AS(ModelRegistry{dir}, IoError);
  }
  auto reg = ModelRegistry::open(dir);
  CHECK(reg.size() == 2);
  CHECK(reg.active_version() == 2);
  CHECK(reg.entry(2).metadata.strategy == "ewc");
  CHECK(reg.entry(1).checkpoint->params.bit_identical(tiny_ckpt(1).params));
  reg.rollback(1);
  CHECK(ModelRegistry::open(dir).active_version() == 1);

  // A tampered checkpoint file is refused.
  {
    REQUIRE(std::filesystem::exists(dir / "v0002.ckpt"));
    std::fstream f(dir / "v0002.ckpt", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-20, std::ios::end);
    f.put('\x7f');
  }
  CHECK_THROWS_AS(ModelRegistry::open(dir), ValidationError);
  CHECK_THROWS_AS(ModelRegistry::open(dir / "nothing"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("ks_statistic agrees with a brute-force oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    auto a = oracle::random_vector(rng, 5 + trial % 17);
    auto b = oracle::random_vector(rng, 3 + trial % 11, 1.5);
    if (trial % 3 == 0) b.insert(b.end(), a.begin(), a.begin() + 3);  // ties
    if (trial % 4 == 0) {
      for (auto& x : a) x = std::round(x);
      for (auto& x : b) x = std::round(x);
    }
    const double brute = oracle::ks_brute(a, b);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(ks_statistic(a, b) == doctest::Approx(brute).epsilon(1e-12));
  }
  CHECK_THROWS_AS(ks_statistic(std::vector<double>{}, std::vector<double>{1.0}),
                  InsufficientDataError);
}

TEST_CASE("drift_detect") {
  const auto ref_feats = features_of(taskgen::synth_real(300, 1));
  const auto profile = make_profile(ref_feats, 1);
  CHECK(profile.size() == 300);

  SUBCASE("a window drawn from the reference itself has zero statistic") {
    const auto r = drift_detect(profile, ref_feats, 0.25, 1);
    CHECK(r.max_statistic == 0.0);
    CHECK_FALSE(r.alert);
    CHECK(r.statistics.size() == spectrum::kFeatureCount);
  }
  SUBCASE("a strong shift alerts") {
    const auto gen = taskgen::make_manifest(taskgen::PresetKind::long_like, 7).generator("crn");
    const auto r = drift_detect(profile, features_of(taskgen::synth_fake(gen, 200, 9)), 0.25, 2);
    CHECK(r.alert);
    CHECK(r.window_id == 2);
    CHECK(to_json(r)["alert"] == true);
  }
  SUBCASE("guards") {
    const std::vector<spectrum::Features> small(10);
    CHECK_THROWS_AS(drift_detect(profile, small, 0.25), InsufficientDataError);
    CHECK_THROWS_AS(make_profile(small, 1), InsufficientDataError);
    CHECK_THROWS_AS(drift_detect(profile, ref_feats, 0.0), ConfigError);
  }
}

TEST_CASE("pipeline config") {
  PipelineConfig cfg;
  cfg.validate();
  const auto back = pipeline_config_from_json(to_json(cfg));
  CHECK(back.window_size == cfg.window_size);
  CHECK(back.drift_threshold == cfg.drift_threshold);
  CHECK(std::holds_alternative<continual::KDConfig>(back.strategy));
  CHECK_THROWS_AS(pipeline_config_from_json({{"windw_size", 10}}), ConfigError);
  CHECK_THROWS_AS(pipeline_config_from_json({{"window_size", 99}}), ConfigError);
  CHECK_THROWS_AS(pipeline_config_from_json({{"train_fraction", 1.0}}), ConfigError);
  PipelineConfig crop;
  crop.run.crop.enabled = true;
  CHECK_THROWS_AS(crop.validate(), ConfigError);

  CHECK(parse_scenario(nlohmann::json::parse(
                           R"([{"generator_name":"crn","count":5,"label_available":false}])"))
            .front()
            .label_available == false);
  CHECK_THROWS_AS(parse_scenario(nlohmann::json::array()), ConfigError);
  CHECK_THROWS_AS(parse_scenario(nlohmann::json::parse(R"([{"generator":"crn","count":5}])")),
                  ConfigError);
}

TEST_CASE("pipeline serving and retraining") {
  const auto manifest =
      taskgen::make_manifest(taskgen::PresetKind::easy_like, 7, taskgen::SplitSizes{120, 20, 20});
  const auto base = manifest.materialize("gaugan");
  const auto shifted = manifest.generator("crn");

  ModelRegistry reg;
  PipelineConfig cfg;
  cfg.run = tiny_run();
  cfg.window_size = 100;
  std::vector<nlohmann::json> events;
  Pipeline pipe(cfg, reg, [&](const nlohmann::json& e) { events.push_back(e); });

  Sample probe{taskgen::synth_real(1, 1).front(), 0, true};
  CHECK_THROWS_AS(pipe.predict(probe), UnavailableError);

  CHECK(pipe.bootstrap(base) == 1);
  CHECK(reg.active_version() == 1);
  CHECK(pipe.reference().size() == 120);
  CHECK(events.front()["event"] == "bootstrap");

  SUBCASE("a shifted window triggers a retrain that becomes active") {
    auto fakes = taskgen::synth_fake(shifted, 50, 4);
    auto reals = taskgen::synth_real(50, 4);
    for (std::size_t i = 0; i < 50; ++i) {
      pipe.predict({reals[i], 0, true});
      pipe.predict({fakes[i], 1, true});
    }
    REQUIRE(pipe.drift_reports().size() == 1);
    CHECK(pipe.drift_reports().front().alert);
    REQUIRE(pipe.retrains().size() == 1);
    CHECK(pipe.retrains().front().parent_version == 1);
    CHECK(reg.active_version() == 2);
    CHECK(reg.entry(2).metadata.parent_version == 1);
    CHECK(pipe.reference().source_version == 2);
    // Rolling back restores the original predictions.
    const auto before = pipeline::predict(*reg.entry(1).checkpoint, probe.patch);
    reg.rollback(1);
    const auto after = pipeline::predict(*reg.active(), probe.patch);
    CHECK(before.score == after.score);
  }
  SUBCASE("approval mode keeps the parent active") {
    PipelineConfig gated = cfg;
    gated.approval_mode = true;
    ModelRegistry reg2;
    Pipeline p2(gated, reg2);
    p2.bootstrap(base);
    std::vector<Sample> window;
    for (auto& x : taskgen::synth_fake(shifted, 100, 2)) window.push_back({x, 1, true});
    for (std::size_t i = 0; i < 50; ++i) window[i].label = 0;
    const auto out = p2.on_alert(7, window);
    REQUIRE(out.has_value());
    CHECK_FALSE(out->activated);
    CHECK(reg2.active_version() == 1);
    p2.approve(out->new_version);
    CHECK(reg2.active_version() == out->new_version);
  }
  SUBCASE("unlabeled windows wait in the pending queue") {
    std::vector<Sample> window;
    for (auto& x : taskgen::synth_real(100, 5)) window.push_back({x, 0, false});
    CHECK_FALSE(pipe.on_alert(3, window).has_value());
    CHECK(pipe.pending_count() == 1);
    CHECK_THROWS_AS(pipe.resolve_pending(std::vector<int>(3, 0)), ConfigError);
    std::vector<int> labels(100, 0);
    for (std::size_t i = 0; i < 100; i += 2) labels[i] = 1;
    CHECK(pipe.resolve_pending(labels).has_value());
    CHECK(pipe.pending_count() == 0);
    CHECK_FALSE(pipe.resolve_pending({}).has_value());
  }
  SUBCASE("concurrent callers are all served") {
    const auto patches = taskgen::synth_real(400, 8);
    std::atomic<int> served{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
      threads.emplace_back([&, t] {
        for (int i = t; i < 400; i += 4) {
          pipe.predict({patches[static_cast<std::size_t>(i)], 0, true});
          ++served;
        }
      });
    }
    for (auto& th : threads) th.join();
    CHECK(served == 400);
    CHECK(pipe.drift_reports().size() == 4);
  }
}

TEST_CASE("run_scenario logs phases and is deterministic") {
  const auto manifest =
      taskgen::make_manifest(taskgen::PresetKind::easy_like, 7, taskgen::SplitSizes{120, 20, 20});
  const auto script = parse_scenario(nlohmann::json::parse(
      R"([{"generator_name":"gaugan","count":100},{"generator_name":"crn","count":200}])"));
  PipelineConfig cfg;
  cfg.run = tiny_run();
  cfg.window_size = 100;
  ModelRegistry a, b;
  const auto ra = run_scenario(script, manifest, cfg, a, 3);
  const auto rb = run_scenario(script, manifest, cfg, b, 3);
  REQUIRE(ra.phases.size() == 2);
  CHECK(ra.phases[1].generator_name == "crn");
  CHECK(ra.events.size() == rb.events.size());
  CHECK(ra.final_version == rb.final_version);
  CHECK(a.active()->params.bit_identical(*&b.active()->params));
  CHECK(ra.retrains.size() >= 1);
  CHECK_THROWS_AS(run_scenario(parse_scenario(nlohmann::json::parse(
                                   R"([{"generator_name":"nope","count":5}])")),
                               manifest, cfg, a, 1),
                  ConfigError);
}
