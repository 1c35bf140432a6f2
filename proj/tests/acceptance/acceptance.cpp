// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Usage: clfake_acceptance [N ...] runs
// only the listed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "core/continual.hpp"
#include "core/harness.hpp"
#include "core/pipeline.hpp"
#include "core/report.hpp"
#include "core/rng.hpp"
#include "core/taskgen.hpp"
#include "oracles.hpp"

using namespace clfake;

namespace {

constexpr std::uint64_t kDataSeed = 7;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

continual::KDConfig kd_config() {
  continual::KDConfig kd;
  kd.alpha = 1.0;
  kd.beta = 1.0;
  kd.tau = 2.0;
  return kd;
}

continual::EWCConfig ewc_config() {
  continual::EWCConfig ewc;
  ewc.lambda = 1e5;
  return ewc;
}

harness::RunConfig run_with_seed(std::uint64_t seed) {
  harness::RunConfig run;
  run.seed = seed;
  return run;
}

// 1 -------------------------------------------------------------------------
Outcome gradient_check() {
  std::mt19937_64 rng(20260101);
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  for (int i = 0; i < 100; ++i) {
    const auto spec = oracle::random_spec(rng);
    const auto r = oracle::gradient_check_detail(spec, rng, 1e-5, 1e-8);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    skipped += r.skipped;
  }
  return {worst <= 1e-4 && checked > 0,
          "max rel error " + fmt("%.2e", worst) + " over " + std::to_string(checked) +
              " components (" + std::to_string(skipped) + " at relu kinks skipped)"};
}

// 2 -------------------------------------------------------------------------
Outcome inert_strategies() {
  const auto m = taskgen::make_manifest(taskgen::PresetKind::easy_like, kDataSeed);
  auto run = run_with_seed(1);
  run.max_epochs = 30;
  run.patience = 10;
  continual::KDConfig kd = kd_config();
  kd.alpha = 0.0;
  continual::EWCConfig ewc = ewc_config();
  ewc.lambda = 0.0;
  auto t = harness::run_experiment(m, continual::Transfer{}, run);
  auto k = harness::run_experiment(m, kd, run);
  auto e = harness::run_experiment(m, ewc, run);
  // Only the strategy label may differ.
  k.strategy = e.strategy = t.strategy;
  const auto ct = report::eval_matrix_csv({t});
  const bool kd_same = report::eval_matrix_csv({k}) == ct;
  const bool ewc_same = report::eval_matrix_csv({e}) == ct;
  return {kd_same && ewc_same, std::string("KD(alpha=0) ") + (kd_same ? "identical" : "differs") +
                                   ", EWC(lambda=0) " + (ewc_same ? "identical" : "differs") +
                                   " (" + std::to_string(ct.size()) + " CSV bytes)"};
}

// 3 -------------------------------------------------------------------------
Outcome ewc_penalty() {
  continual::TaskAnchor a;
  a.anchor_params = nn::ParamVector(std::vector<double>{0.0});
  a.fisher_diag = {2.0};
  const std::vector<continual::TaskAnchor> anchors{a};
  const double at_anchor =
      continual::ewc_penalty(nn::ParamVector(std::vector<double>{0.0}), anchors, 3.0);
  const double off =
      continual::ewc_penalty(nn::ParamVector(std::vector<double>{1.0}), anchors, 3.0);
  std::vector<double> g(1, 0.0);
  continual::add_ewc_gradient(g, nn::ParamVector(std::vector<double>{1.0}), anchors, 3.0);

  // Random anchors: gradient against lambda * F * delta.
  std::mt19937_64 rng(3);
  const std::size_t n = 200;
  continual::TaskAnchor r;
  r.anchor_params = nn::ParamVector(oracle::random_vector(rng, n));
  r.fisher_diag = oracle::random_vector(rng, n);
  for (auto& f : r.fisher_diag) f = std::abs(f);
  const auto theta = oracle::random_vector(rng, n);
  std::vector<double> gr(n, 0.0);
  const std::vector<continual::TaskAnchor> ra{r};
  continual::add_ewc_gradient(gr, nn::ParamVector(theta), ra, 7.5);
  double err = std::abs(g[0] - 3.0 * 2.0 * 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    err = std::max(err, std::abs(gr[i] - 7.5 * r.fisher_diag[i] * (theta[i] - r.anchor_params[i])));
  }
  const bool pass = at_anchor == 0.0 && std::abs(off - 3.0) <= 1e-12 && err <= 1e-6;
  return {pass, "penalty at anchor " + fmt("%g", at_anchor) + ", at delta 1 " + fmt("%.12g", off) +
                    ", gradient error " + fmt("%.1e", err)};
}

// 4 -------------------------------------------------------------------------
Outcome fisher_logistic() {
  // Two-class net whose logit difference is w * x: p = sigmoid(w x).
  const double w = 1.5;
  const nn::ModelSpec spec{{1, 2}};
  const nn::ParamVector params(std::vector<double>{0.0, w, 0.0, 0.0});
  std::mt19937_64 rng(44);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t n = 100000;
  nn::LabeledSet set;
  set.width = 1;
  set.inputs.reserve(n);
  set.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = normal(rng);
    const double p = 1.0 / (1.0 + std::exp(-w * x));
    set.inputs.push_back(x);
    set.labels.push_back(unif(rng) < p ? 1 : 0);
  }
  continual::EWCConfig cfg;
  cfg.fisher_sample_count = static_cast<int>(n);
  const auto f = continual::estimate_fisher(spec, params, set, cfg, 1);

  // Oracle by quadrature over the standard normal: E[p(1-p) x^2], E[p(1-p)].
  double fw = 0.0, fb = 0.0;
  const double h = 1e-3;
  for (double x = -12.0; x <= 12.0; x += h) {
    const double p = 1.0 / (1.0 + std::exp(-w * x));
    const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    fw += p * (1.0 - p) * x * x * phi * h;
    fb += p * (1.0 - p) * phi * h;
  }
  const double ew = std::abs(f[1] - fw) / fw;
  const double eb = std::abs(f[3] - fb) / fb;
  return {ew <= 0.05 && eb <= 0.05,
          "weight entry " + fmt("%.4f", f[1]) + " vs " + fmt("%.4f", fw) + " (" +
              fmt("%.2f", 100 * ew) + "%), bias entry " + fmt("%.4f", f[3]) + " vs " +
              fmt("%.4f", fb) + " (" + fmt("%.2f", 100 * eb) + "%)"};
}

// 5 -------------------------------------------------------------------------
Outcome row_averages() {
  const std::vector<double> kd{64.45, 58.75, 79.85, 97.30, 64.65, 94.36, 51.22};
  const std::vector<double> tr{57.80, 54.38, 58.79, 56.89, 71.63, 59.32, 71.02};
  const double a = harness::row_average(kd);
  const double b = harness::row_average(tr);
  return {a == 72.94 && b == 61.40, "KD row " + fmt("%.2f", a) + ", Transfer row " + fmt("%.2f", b)};
}

// 6 -------------------------------------------------------------------------
Outcome zero_shot() {
  const auto m = taskgen::make_manifest(taskgen::PresetKind::easy_like, kDataSeed);
  const auto tasks = m.materialize_all();
  const auto& train = m.generator("gaugan");
  bool pass = true;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto zs = harness::zero_shot_eval(nn::default_spec(), run_with_seed(seed),
                                            tasks[m.index_of("gaugan")], tasks);
    double same_min = 1.0, cross_sum = 0.0;
    int cross_n = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const auto& g = m.generator(tasks[i].name);
      if (g.name == train.name || g.family == taskgen::Family::unknown_like) continue;
      const double acc = zs.rows[0][i];
      if (g.family == train.family) {
        same_min = std::min(same_min, acc);
      } else {
        cross_sum += acc;
        ++cross_n;
      }
    }
    const double cross = cross_sum / cross_n;
    pass = pass && same_min >= 0.85 && cross <= 0.65;
    detail += "seed " + std::to_string(seed) + ": same-family min " + fmt("%.3f", same_min) +
              ", cross-family mean " + fmt("%.3f", cross) + "; ";
  }
  return {pass, detail};
}

// 7 -------------------------------------------------------------------------
Outcome easy_like_strategies() {
  const auto m = taskgen::make_manifest(taskgen::PresetKind::easy_like, kDataSeed);
  std::vector<double> t, k, e;
  for (auto seed : kSeeds) {
    const auto run = run_with_seed(seed);
    t.push_back(harness::run_experiment(m, continual::Transfer{}, run).final_average);
    k.push_back(harness::run_experiment(m, kd_config(), run).final_average);
    e.push_back(harness::run_experiment(m, ewc_config(), run).final_average);
  }
  const double mt = median(t), mk = median(k), me = median(e);
  return {mk - mt >= 0.05 && me - mt >= 0.05,
          "median final average: Transfer " + fmt("%.4f", mt) + ", KD " + fmt("%.4f", mk) +
              ", EWC " + fmt("%.4f", me)};
}

// 8 -------------------------------------------------------------------------
Outcome grouping() {
  const auto m = taskgen::make_manifest(taskgen::PresetKind::long_like, kDataSeed);
  harness::ExperimentOptions grouped;
  grouped.group_size = 3;
  std::vector<double> gain;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto run = run_with_seed(seed);
    const double u = harness::run_experiment(m, ewc_config(), run).final_average;
    const double g = harness::run_experiment(m, ewc_config(), run, grouped).final_average;
    gain.push_back(g - u);
    detail += "seed " + std::to_string(seed) + ": " + fmt("%.4f", u) + " -> " + fmt("%.4f", g) + "; ";
  }
  const double mg = median(gain);
  return {mg >= 0.05, "EWC ungrouped -> grouped by 3, " + detail + "median gain " + fmt("%.4f", mg)};
}

// 9 -------------------------------------------------------------------------
Outcome drift() {
  const auto m = taskgen::make_manifest(taskgen::PresetKind::easy_like, kDataSeed);
  const auto base = m.generator("gaugan");
  const auto shifted = taskgen::make_manifest(taskgen::PresetKind::long_like, kDataSeed)
                           .generator("crn");
  if (shifted.max_amplitude() < 0.15) return {false, "shifted generator amplitude below 0.15"};

  // Half real, half fake, as the serving stream delivers them.
  auto draw = [](const taskgen::GeneratorSpec& gen, std::size_t n, std::uint64_t seed) {
    std::vector<spectrum::Features> out;
    for (const auto& p : taskgen::synth_real(n / 2, derive_seed(seed, 0))) {
      out.push_back(pipeline::extract_features(p));
    }
    for (const auto& p : taskgen::synth_fake(gen, n - n / 2, derive_seed(seed, 1))) {
      out.push_back(pipeline::extract_features(p));
    }
    return out;
  };
  const auto profile = pipeline::make_profile(draw(base, 1000, 0xAEF), 1);
  int null_alerts = 0, shift_alerts = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto r = pipeline::drift_detect(profile, draw(base, 200, 0x10000 + i), 0.25);
    null_alerts += r.alert ? 1 : 0;
  }
  for (int i = 0; i < 100; ++i) {
    const auto r = pipeline::drift_detect(profile, draw(shifted, 200, 0x20000 + i), 0.25);
    shift_alerts += r.alert ? 1 : 0;
  }
  const double null_rate = null_alerts / 1000.0;
  const double shift_rate = shift_alerts / 100.0;
  return {null_rate <= 0.05 && shift_rate >= 0.99,
          "null alert rate " + fmt("%.3f", null_rate) + " (1000 windows), shifted alert rate " +
              fmt("%.2f", shift_rate) + " (100 windows)"};
}

// 10 ------------------------------------------------------------------------
Outcome two_phase_pipeline() {
  const auto m = taskgen::make_manifest(taskgen::PresetKind::easy_like, kDataSeed);
  const auto script = pipeline::parse_scenario(nlohmann::json::parse(
      R"([{"generator_name":"gaugan","count":400,"label_available":true},
          {"generator_name":"faceforensics","count":600,"label_available":true}])"));
  pipeline::PipelineConfig cfg;
  cfg.strategy = kd_config();

  // Fixed probe patches scored under v1.
  std::vector<taskgen::Patch> probes = taskgen::synth_real(20, 0x9807);
  for (auto& p : taskgen::synth_fake(m.generator("faceforensics"), 20, 0x9808)) {
    probes.push_back(std::move(p));
  }
  auto scores = [&](const checkpoint::Checkpoint& c) {
    std::vector<double> s;
    for (const auto& p : probes) s.push_back(pipeline::predict(c, p).score);
    return s;
  };

  bool pass = true;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("clfake_acceptance_registry_" + std::to_string(seed));
    std::filesystem::remove_all(dir);
    pipeline::ModelRegistry registry(dir);
    std::vector<double> v1_scores;
    const auto sink = [&](const nlohmann::json& ev) {
      if (ev.at("event") == "bootstrap") v1_scores = scores(*registry.active());
    };
    const auto r = pipeline::run_scenario(script, m, cfg, registry, seed, sink);
    const double gain_b = r.phases[1].after - r.phases[1].before;
    const double loss_a = r.phases[0].before - r.phases[0].after;

    registry.rollback(1);
    const bool same_live = scores(*registry.active()) == v1_scores;
    const auto reopened = pipeline::ModelRegistry::open(dir);
    const bool same_disk = reopened.active_version() == 1 &&
                           scores(*reopened.active()) == v1_scores;
    const bool ok = gain_b >= 0.20 && loss_a <= 0.15 && !r.retrains.empty() &&
                    same_live && same_disk;
    pass = pass && ok;
    detail += "seed " + std::to_string(seed) + ": B +" + fmt("%.3f", gain_b) + ", A -" +
              fmt("%.3f", loss_a) + ", " + std::to_string(r.retrains.size()) + " retrains, rollback " +
              (same_live && same_disk ? "bit-identical" : "MISMATCH") + "; ";
    std::filesystem::remove_all(dir);
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "gradient check on 100 random nets", 30, gradient_check},
      {2, "KD(alpha=0) and EWC(lambda=0) reproduce Transfer", 120, inert_strategies},
      {3, "EWC penalty and gradient", 1, ewc_penalty},
      {4, "Fisher of a Bernoulli-logistic model", 30, fisher_logistic},
      {5, "row_average of published rows", 1, row_averages},
      {6, "zero-shot same vs cross family", 180, zero_shot},
      {7, "easy_like: KD and EWC beat Transfer by 5 points", 600, easy_like_strategies},
      {8, "long_like: grouping by 3 beats ungrouped by 5 points", 900, grouping},
      {9, "drift monitor false and true alert rates", 120, drift},
      {10, "two-phase pipeline with rollback", 300, two_phase_pipeline},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && only.count(c.id) == 0) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s criterion %2d: %s | %s | %.1f s (limit %.0f s%s)\n", pass ? "PASS" : "FAIL",
                c.id, c.name, o.detail.c_str(), secs, c.limit_seconds,
                in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
