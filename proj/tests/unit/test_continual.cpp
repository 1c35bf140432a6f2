// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "core/continual.hpp"
#include "core/errors.hpp"
#include "core/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace clfake;
using namespace clfake::continual;
using nn::Logits;

namespace {

double softened(const Logits& z, double tau, int c) {
  const double a = std::exp(z[0] / tau), b = std::exp(z[1] / tau);
  return (c == 0 ? a : b) / (a + b);
}

// Two Gaussian blobs in `width` dimensions, balanced labels.
TaskDataset blobs(std::size_t width, double shift, std::uint64_t seed,
                  const std::string& name = "blobs") {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  auto make = [&](std::size_t n) {
    nn::LabeledSet s;
    s.width = width;
    for (std::size_t i = 0; i < n; ++i) {
      const int y = static_cast<int>(i % 2);
      std::vector<double> x(width);
      for (auto& v : x) v = g(rng) + (y == 1 ? shift : -shift);
      s.push_back(x, y);
    }
    return s;
  };
  TaskDataset t;
  t.name = name;
  t.train = make(160);
  t.val = make(80);
  t.test = make(80);
  return t;
}

harness::RunConfig quick_run(std::uint64_t seed) {
  harness::RunConfig run;
  run.max_epochs = 30;
  run.patience = 10;
  run.batch_size = 16;
  run.lr_initial = 0.05;
  run.seed = seed;
  return run;
}

}  // namespace

TEST_CASE("distill_term") {
  SUBCASE("teacher equal to student gives the softened entropy") {
    const Logits z{0.4, -1.1};
    const double tau = 2.0;
    double entropy = 0.0;
    for (int c = 0; c < 2; ++c) {
      const double p = softened(z, tau, c);
      entropy -= p * std::log(p);
    }
    CHECK(distill_term(z, z, tau) == doctest::Approx(entropy).epsilon(1e-13));
  }
  SUBCASE("uniform teacher averages the student log-probs") {
    const Logits s{1.5, -0.2};
    const double expected =
        -0.5 * std::log(softened(s, 1.0, 0)) - 0.5 * std::log(softened(s, 1.0, 1));
    CHECK(distill_term({0.0, 0.0}, s, 1.0) == doctest::Approx(expected).epsilon(1e-13));
  }
  SUBCASE("random pairs match -sum p_t log p_s") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 3.0);
    for (int i = 0; i < 100; ++i) {
      const Logits t{g(rng), g(rng)}, s{g(rng), g(rng)};
      const double tau = 0.5 + (i % 5);
      const double expected = -softened(t, tau, 0) * std::log(softened(s, tau, 0)) -
                              softened(t, tau, 1) * std::log(softened(s, tau, 1));
      CHECK(distill_term(t, s, tau) == doctest::Approx(expected).epsilon(1e-10));
    }
  }
}

TEST_CASE("kd_loss") {
  KDConfig cfg;
  SUBCASE("alpha 0 is exactly beta * L_S") {
    cfg.alpha = 0.0;
    cfg.beta = 1.0;
    const Logits t{3.0, -2.0}, s{0.3, 0.9};
    CHECK(kd_loss(t, s, 1, cfg) == nn::cross_entropy(nn::softmax_temp(s, 1.0), 1));
  }
  SUBCASE("beta 0 with teacher = student is alpha times the softened entropy") {
    cfg.alpha = 2.5;
    cfg.beta = 0.0;
    const Logits z{0.7, -0.3};
    CHECK(kd_loss(z, z, 0, cfg) ==
          doctest::Approx(2.5 * distill_term(z, z, cfg.tau)).epsilon(1e-14));
  }
  SUBCASE("saturated teacher and uniform student give 2 ln 2") {
    cfg.alpha = cfg.beta = 1.0;
    cfg.tau = 1.0;
    CHECK(kd_loss({20.0, -20.0}, {0.0, 0.0}, 0, cfg) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-9));
  }
  SUBCASE("logit derivative matches central differences") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int i = 0; i < 50; ++i) {
      KDConfig c;
      c.alpha = 0.3 + (i % 3);
      c.beta = 0.5 * (i % 4);
      c.tau = 0.5 + (i % 6);
      c.scale_by_tau_squared = i % 2 == 0;
      if (c.alpha + c.beta == 0.0) c.beta = 1.0;
      const Logits t{g(rng), g(rng)}, s{g(rng), g(rng)};
      const int y = i % 2;
      const auto term = kd_loss_term(t, s, y, c);
      for (int k = 0; k < 2; ++k) {
        Logits sp = s, sm = s;
        sp[k] += 1e-6;
        sm[k] -= 1e-6;
        const double fd = (kd_loss(t, sp, y, c) - kd_loss(t, sm, y, c)) / 2e-6;
        CHECK(term.dlogits[k] == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
  SUBCASE("invalid coefficients are rejected") {
    KDConfig bad;
    bad.tau = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = KDConfig{};
    bad.alpha = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = KDConfig{};
    bad.alpha = bad.beta = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
}

TEST_CASE("ewc_penalty and gradient") {
  TaskAnchor a;
  a.anchor_params = nn::ParamVector(std::vector<double>{0.0});
  a.fisher_diag = {2.0};
  const std::vector<TaskAnchor> anchors{a};

  CHECK(ewc_penalty(nn::ParamVector(std::vector<double>{0.0}), anchors, 3.0) == 0.0);
  CHECK(ewc_penalty(nn::ParamVector(std::vector<double>{1.0}), anchors, 3.0) == 3.0);

  std::vector<double> grad(1, 0.0);
  add_ewc_gradient(grad, nn::ParamVector(std::vector<double>{1.0}), anchors, 3.0);
  CHECK(grad[0] == 6.0);

  SUBCASE("gradient matches finite differences of the penalty") {
    std::mt19937_64 rng(8);
    const std::size_t n = 30;
    std::vector<TaskAnchor> many(3);
    for (auto& an : many) {
      an.anchor_params = nn::ParamVector(oracle::random_vector(rng, n));
      an.fisher_diag = oracle::random_vector(rng, n);
      for (auto& f : an.fisher_diag) f = std::abs(f);
    }
    auto theta = oracle::random_vector(rng, n);
    std::vector<double> g(n, 0.0);
    add_ewc_gradient(g, nn::ParamVector(theta), many, 7.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto tp = theta, tm = theta;
      tp[i] += 1e-5;
      tm[i] -= 1e-5;
      const double fd = (ewc_penalty(nn::ParamVector(tp), many, 7.0) -
                         ewc_penalty(nn::ParamVector(tm), many, 7.0)) /
                        2e-5;
      CHECK(std::abs(g[i] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
  SUBCASE("incongruent anchors are a configuration error") {
    CHECK_THROWS_AS(ewc_penalty(nn::ParamVector(std::vector<double>{1.0, 2.0}), anchors, 1.0),
                    ConfigError);
  }
}

TEST_CASE("running_sum accumulation reproduces the per-task sum") {
  std::mt19937_64 rng(12);
  const std::size_t n = 20;
  std::vector<TaskAnchor> list, merged;
  for (int k = 0; k < 4; ++k) {
    TaskAnchor a;
    a.anchor_params = nn::ParamVector(oracle::random_vector(rng, n));
    a.fisher_diag = oracle::random_vector(rng, n);
    for (auto& f : a.fisher_diag) f = std::abs(f);
    if (k == 2) a.fisher_diag[3] = 0.0;
    accumulate_anchor(list, a, Accumulation::per_task_list);
    accumulate_anchor(merged, a, Accumulation::running_sum);
  }
  CHECK(list.size() == 4);
  CHECK(merged.size() == 1);
  for (int t = 0; t < 5; ++t) {
    const nn::ParamVector theta(oracle::random_vector(rng, n));
    CHECK(ewc_penalty(theta, merged, 2.0) ==
          doctest::Approx(ewc_penalty(theta, list, 2.0)).epsilon(1e-10));
  }
}

TEST_CASE("estimate_fisher") {
  SUBCASE("dead parameters have zero Fisher and all entries are non-negative") {
    nn::ModelSpec spec{{2, 2, 2}};
    nn::ParamVector p(std::vector<double>{1, -1, 0.5, -3, 0, -10, 1, 0, -1, 0, 0, 0});
    nn::LabeledSet set;
    set.width = 2;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i) {
      set.push_back(oracle::random_vector(rng, 2, 0.5), i % 2);
    }
    EWCConfig cfg;
    const auto f = estimate_fisher(spec, p, set, cfg, 3);
    for (double v : f) CHECK(v >= 0.0);
    CHECK(f[spec.weight_index(0, 0, 1)] == 0.0);
    CHECK(f[spec.bias_offset(0) + 1] == 0.0);
    CHECK(f[spec.weight_index(1, 1, 0)] == 0.0);
  }
  SUBCASE("single sample matches the squared gradient") {
    nn::ModelSpec spec{{1, 2}};
    const double w = 0.4, x = 1.5;
    nn::ParamVector p(std::vector<double>{0.0, w, 0.0, 0.0});
    nn::LabeledSet set;
    set.width = 1;
    set.push_back(std::vector<double>{x}, 1);
    EWCConfig cfg;
    const auto f = estimate_fisher(spec, p, set, cfg, 0);
    const double prob = 1.0 / (1.0 + std::exp(-w * x));
    CHECK(f[1] == doctest::Approx((1 - prob) * (1 - prob) * x * x).epsilon(1e-12));
  }
  SUBCASE("empty set is a configuration error") {
    nn::ModelSpec spec{{1, 2}};
    nn::LabeledSet empty;
    empty.width = 1;
    CHECK_THROWS_AS(estimate_fisher(spec, nn::ParamVector(4), empty, EWCConfig{}, 0),
                    ConfigError);
  }
  SUBCASE("sampling is seeded and without replacement") {
    nn::ModelSpec spec{{3, 2}};
    std::mt19937_64 rng(2);
    nn::ParamVector p(oracle::random_vector(rng, spec.param_count()));
    nn::LabeledSet set;
    set.width = 3;
    for (int i = 0; i < 40; ++i) set.push_back(oracle::random_vector(rng, 3), i % 2);
    EWCConfig all;
    all.fisher_sample_count = 40;
    EWCConfig more;
    more.fisher_sample_count = 1000;
    // Using every sample must not depend on the seed or on oversampling.
    const auto a = estimate_fisher(spec, p, set, all, 1);
    const auto b = estimate_fisher(spec, p, set, more, 99);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
    EWCConfig few;
    few.fisher_sample_count = 10;
    CHECK(estimate_fisher(spec, p, set, few, 5) == estimate_fisher(spec, p, set, few, 5));
  }
}

TEST_CASE("train_task") {
  const nn::ModelSpec spec{{6, 8, 2}};
  const auto task = blobs(6, 1.0, 21);
  const auto run = quick_run(77);
  const auto init = nn::init_params(spec, 5);

  SUBCASE("separable toy task reaches high train accuracy") {
    auto easy = blobs(6, 2.5, 3);
    const auto r = train_task(spec, init, easy, Transfer{}, nullptr, {}, run);
    CHECK(nn::accuracy(spec, r.params, nn::BatchView::of(easy.train)) >= 0.99);
    CHECK(static_cast<int>(r.trace.epochs.size()) <= run.max_epochs);
  }
  SUBCASE("KD with alpha 0 and EWC with lambda 0 follow Transfer exactly") {
    const auto base = train_task(spec, init, task, Transfer{}, nullptr, {}, run);
    const Teacher teacher{spec, nn::init_params(spec, 6)};
    KDConfig kd;
    kd.alpha = 0.0;
    const auto r_kd = train_task(spec, init, task, kd, &teacher, {}, run);
    TaskAnchor anchor;
    anchor.anchor_params = teacher.params;
    anchor.fisher_diag.assign(spec.param_count(), 1.0);
    EWCConfig ewc;
    ewc.lambda = 0.0;
    const std::vector<TaskAnchor> anchors{anchor};
    const auto r_ewc = train_task(spec, init, task, ewc, nullptr, anchors, run);
    CHECK(r_kd.params.bit_identical(base.params));
    CHECK(r_ewc.params.bit_identical(base.params));
    REQUIRE(r_kd.trace.epochs.size() == base.trace.epochs.size());
    for (std::size_t e = 0; e < base.trace.epochs.size(); ++e) {
      CHECK(r_kd.trace.epochs[e].train_loss == base.trace.epochs[e].train_loss);
      CHECK(r_ewc.trace.epochs[e].val_loss == base.trace.epochs[e].val_loss);
    }
  }
  SUBCASE("KD without a teacher is a configuration error") {
    CHECK_THROWS_AS(train_task(spec, init, task, KDConfig{}, nullptr, {}, run), ConfigError);
  }
  SUBCASE("the teacher is left untouched") {
    const Teacher teacher{spec, nn::init_params(spec, 6)};
    const auto copy = teacher.params;
    train_task(spec, init, task, KDConfig{}, &teacher, {}, run);
    CHECK(teacher.params.bit_identical(copy));
  }
  SUBCASE("huge lambda pins the parameters to the anchor") {
    const auto first = train_task(spec, init, task, Transfer{}, nullptr, {}, run);
    EWCConfig ewc;
    ewc.lambda = 1e9;
    TaskAnchor anchor;
    anchor.anchor_params = first.params;
    anchor.fisher_diag = estimate_fisher(spec, first.params, task.train, ewc, 1);
    for (auto& f : anchor.fisher_diag) f += 1e-3;  // every coordinate constrained
    const std::vector<TaskAnchor> anchors{anchor};
    const auto second = train_task(spec, first.params, blobs(6, 1.0, 99, "other"), ewc,
                                   nullptr, anchors, run);
    double linf = 0.0;
    for (std::size_t i = 0; i < spec.param_count(); ++i) {
      linf = std::max(linf, std::abs(second.params[i] - first.params[i]));
    }
    CHECK(linf <= 1e-3);
  }
  SUBCASE("early stopping returns the best validation epoch") {
    auto r = train_task(spec, init, task, Transfer{}, nullptr, {}, run);
    if (r.trace.best_epoch >= 0) {
      const auto& best = r.trace.epochs[r.trace.best_epoch];
      for (std::size_t e = r.trace.best_epoch + 1; e < r.trace.epochs.size(); ++e) {
        CHECK(r.trace.epochs[e].val_accuracy <= best.val_accuracy);
      }
      CHECK(nn::accuracy(spec, r.params, nn::BatchView::of(task.val)) ==
            doctest::Approx(best.val_accuracy));
    }
  }
}

TEST_CASE("train_sequence") {
  const nn::ModelSpec spec{{6, 8, 2}};
  const auto run = quick_run(31);

  SUBCASE("single-task stream equals plain train_task") {
    const std::vector<TaskDataset> stream{blobs(6, 1.0, 4)};
    const auto seq = train_sequence(spec, stream, KDConfig{}, run, stream);
    harness::RunConfig stage = run;
    stage.seed = stage_seed(run.seed, 0);
    const auto direct = train_task(spec, nn::init_params(spec, derive_seed(run.seed, 0x1417)),
                                   stream[0], Transfer{}, nullptr, {}, stage);
    CHECK(seq.final_params.bit_identical(direct.params));
  }
  SUBCASE("two identical tasks do not forget") {
    const auto t = blobs(6, 1.2, 8);
    const std::vector<TaskDataset> stream{t, t};
    for (const Strategy& s : {Strategy{Transfer{}}, Strategy{KDConfig{}}, Strategy{EWCConfig{}}}) {
      const auto seq = train_sequence(spec, stream, s, run, stream);
      CHECK(seq.matrix.rows[1][0] >= seq.matrix.rows[0][0] - 0.02);
    }
  }
  SUBCASE("matrix shape and anchors") {
    std::vector<TaskDataset> stream;
    for (int i = 0; i < 4; ++i) stream.push_back(blobs(6, 1.0, 50 + i, "t" + std::to_string(i)));
    const auto seq = train_sequence(spec, stream, EWCConfig{}, run, stream);
    CHECK(seq.matrix.rows.size() == 4);
    for (const auto& row : seq.matrix.rows) CHECK(row.size() == 4);
    CHECK(seq.anchors.size() == 4);
    CHECK(seq.checkpoints.size() == 4);
  }
  SUBCASE("empty stream is rejected") {
    CHECK_THROWS_AS(train_sequence(spec, {}, Transfer{}, run, {}), ConfigError);
  }
}
