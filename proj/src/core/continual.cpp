// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#include "core/continual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace clfake::continual {
namespace {

constexpr double kLogClamp = 1e-12;

std::size_t patch_side(std::size_t width) {
  const auto side = static_cast<std::size_t>(
      std::lround(std::sqrt(static_cast<double>(width))));
  if (side * side != width) {
    throw ConfigError("cropping needs square inputs, got width " +
                      std::to_string(width));
  }
  return side;
}

void copy_crop(std::span<const double> src, std::size_t side, std::size_t size,
               std::size_t dx, std::size_t dy, double* dst) {
  for (std::size_t y = 0; y < size; ++y) {
    const double* row = src.data() + (y + dy) * side + dx;
    std::copy(row, row + size, dst + y * size);
  }
}

void check_anchor(const nn::ParamVector& params, const TaskAnchor& anchor) {
  if (anchor.anchor_params.size() != params.size() ||
      anchor.fisher_diag.size() != params.size()) {
    throw ConfigError("EWC anchor '" + anchor.task_name +
                      "' is not congruent with the parameters");
  }
}

struct ValScore {
  double accuracy = 0.0;
  double loss = 0.0;
};

ValScore score(const nn::ModelSpec& spec, const nn::ParamVector& params,
               const nn::LabeledSet& set) {
  const auto logits = nn::forward_batch(spec, params, nn::BatchView::of(set));
  ValScore s;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (nn::predicted_label(logits[i]) == set.labels[i]) ++correct;
    s.loss += nn::cross_entropy(nn::softmax_temp(logits[i], 1.0), set.labels[i]);
  }
  s.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
  s.loss /= static_cast<double>(set.size());
  return s;
}

// Accuracy first; equal accuracy counts as progress when the loss drops.
bool improves(const ValScore& candidate, const ValScore& best) {
  if (candidate.accuracy != best.accuracy) {
    return candidate.accuracy > best.accuracy;
  }
  return candidate.loss < best.loss;
}

}  // namespace

void KDConfig::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) {
    throw ConfigError("KD coefficients must be non-negative");
  }
  if (!(alpha + beta > 0.0)) throw ConfigError("KD needs alpha + beta > 0");
  if (!(tau > 0.0)) throw ConfigError("KD temperature must be positive");
}

void EWCConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("EWC lambda must be a non-negative finite number");
  }
  if (fisher_sample_count < 1) {
    throw ConfigError("EWC needs at least one Fisher sample");
  }
}

std::string strategy_name(const Strategy& strategy) {
  struct {
    std::string operator()(const Transfer&) const { return "transfer"; }
    std::string operator()(const KDConfig&) const { return "kd"; }
    std::string operator()(const EWCConfig&) const { return "ewc"; }
  } visitor;
  return std::visit(visitor, strategy);
}

void validate(const Strategy& strategy) {
  if (const auto* kd = std::get_if<KDConfig>(&strategy)) kd->validate();
  if (const auto* ewc = std::get_if<EWCConfig>(&strategy)) ewc->validate();
}

double distill_term(const nn::Logits& teacher, const nn::Logits& student,
                    double tau) {
  const auto pt = nn::softmax_temp(teacher, tau);
  const auto ps = nn::softmax_temp(student, tau);
  return -(pt[0] * std::log(std::max(ps[0], kLogClamp)) +
           pt[1] * std::log(std::max(ps[1], kLogClamp)));
}

double kd_loss(const nn::Logits& teacher, const nn::Logits& student, int label,
               const KDConfig& cfg) {
  return kd_loss_term(teacher, student, label, cfg).loss;
}

nn::LossTerm kd_loss_term(const nn::Logits& teacher, const nn::Logits& student,
                          int label, const KDConfig& cfg) {
  const double scale = cfg.scale_by_tau_squared ? cfg.tau * cfg.tau : 1.0;
  const double distill_weight = cfg.alpha * scale;

  const auto pt = nn::softmax_temp(teacher, cfg.tau);
  const auto ps = nn::softmax_temp(student, cfg.tau);
  const double distill = distill_term(teacher, student, cfg.tau);
  const nn::LossTerm hard = nn::cross_entropy_term(student, label);

  nn::LossTerm term;
  term.loss = distill_weight * distill + cfg.beta * hard.loss;
  // d/dz_s of -sum pt log softmax(z_s / tau) = (ps - pt) / tau.
  for (std::size_t c = 0; c < 2; ++c) {
    term.dlogits[c] = cfg.beta * hard.dlogits[c] +
                      distill_weight * (ps[c] - pt[c]) / cfg.tau;
  }
  return term;
}

double ewc_penalty(const nn::ParamVector& params,
                   std::span<const TaskAnchor> anchors, double lambda) {
  double total = 0.0;
  for (const auto& anchor : anchors) {
    check_anchor(params, anchor);
    double sum = anchor.offset;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double d = params[i] - anchor.anchor_params[i];
      sum += anchor.fisher_diag[i] * d * d;
    }
    total += 0.5 * lambda * sum;
  }
  return total;
}

void add_ewc_gradient(std::span<double> gradient, const nn::ParamVector& params,
                      std::span<const TaskAnchor> anchors, double lambda) {
  if (gradient.size() != params.size()) {
    throw ConfigError("gradient is not congruent with parameters");
  }
  for (const auto& anchor : anchors) {
    check_anchor(params, anchor);
    for (std::size_t i = 0; i < params.size(); ++i) {
      gradient[i] += lambda * anchor.fisher_diag[i] *
                     (params[i] - anchor.anchor_params[i]);
    }
  }
}

std::vector<double> estimate_fisher(const nn::ModelSpec& spec,
                                    const nn::ParamVector& params,
                                    const nn::LabeledSet& set,
                                    const EWCConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (set.empty()) throw ConfigError("Fisher estimation needs samples");
  const std::size_t count =
      std::min(static_cast<std::size_t>(cfg.fisher_sample_count), set.size());

  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `count` slots are a uniform sample
  // without replacement.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }

  std::vector<double> fisher(params.size(), 0.0);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t idx = order[k];
    const int label = set.labels[idx];
    const nn::BatchView one{set.width, set.row(idx),
                            std::span<const int>(&set.labels[idx], 1)};
    const auto grad = nn::backward(
        spec, params, one, [label](std::size_t, const nn::Logits& logits) {
          return nn::cross_entropy_term(logits, label);
        });
    for (std::size_t i = 0; i < fisher.size(); ++i) {
      fisher[i] += grad.values[i] * grad.values[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (auto& f : fisher) f *= inv;
  return fisher;
}

void accumulate_anchor(std::vector<TaskAnchor>& anchors, TaskAnchor anchor,
                       Accumulation mode) {
  if (mode == Accumulation::per_task_list || anchors.empty()) {
    anchors.push_back(std::move(anchor));
    return;
  }
  // F_a (x - a)^2 + F_b (x - b)^2
  //   = (F_a + F_b) (x - m)^2 + F_a a^2 + F_b b^2 - (F_a + F_b) m^2,
  // with m = (F_a a + F_b b) / (F_a + F_b).
  TaskAnchor& merged = anchors.front();
  check_anchor(merged.anchor_params, anchor);
  double offset = merged.offset + anchor.offset;
  for (std::size_t i = 0; i < merged.fisher_diag.size(); ++i) {
    const double fa = merged.fisher_diag[i];
    const double fb = anchor.fisher_diag[i];
    const double a = merged.anchor_params[i];
    const double b = anchor.anchor_params[i];
    const double f = fa + fb;
    if (f > 0.0) {
      const double m = (fa * a + fb * b) / f;
      const double da = a - m;
      const double db = b - m;
      offset += fa * da * da + fb * db * db;
      merged.anchor_params[i] = m;
    } else {
      merged.anchor_params[i] = b;
    }
    merged.fisher_diag[i] = f;
  }
  merged.offset = offset;
  merged.task_name += "+" + anchor.task_name;
}

std::uint64_t stage_seed(std::uint64_t run_seed, std::uint64_t stage) {
  return derive_seed(run_seed, 0x5eed0000u + stage);
}

nn::LabeledSet center_crop(const nn::LabeledSet& set,
                           const harness::CropConfig& crop) {
  if (!crop.enabled) return set;
  const std::size_t side = patch_side(set.width);
  const auto size = static_cast<std::size_t>(crop.size);
  if (crop.size <= 0 || size > side) {
    throw ConfigError("crop size must lie in [1, " + std::to_string(side) + "]");
  }
  const std::size_t off = (side - size) / 2;
  nn::LabeledSet out;
  out.width = size * size;
  out.labels = set.labels;
  out.inputs.resize(set.size() * out.width);
  for (std::size_t i = 0; i < set.size(); ++i) {
    copy_crop(set.row(i), side, size, off, off,
              out.inputs.data() + i * out.width);
  }
  return out;
}

TrainResult train_task(const nn::ModelSpec& spec, const nn::ParamVector& params,
                       const TaskDataset& task, const Strategy& strategy,
                       const Teacher* teacher,
                       std::span<const TaskAnchor> anchors,
                       const harness::RunConfig& run) {
  spec.validate();
  run.validate();
  validate(strategy);
  if (task.train.empty() || task.val.empty()) {
    throw ConfigError("task '" + task.name + "' needs train and val samples");
  }
  const auto* kd = std::get_if<KDConfig>(&strategy);
  const auto* ewc = std::get_if<EWCConfig>(&strategy);
  if (kd != nullptr && teacher == nullptr) {
    throw ConfigError("KD training of '" + task.name + "' needs a teacher");
  }
  if (kd != nullptr && !(teacher->spec == spec)) {
    throw ConfigError("teacher and student architectures differ");
  }
  if (ewc != nullptr) {
    for (const auto& anchor : anchors) check_anchor(params, anchor);
  }

  const std::size_t src_width = task.train.width;
  const std::size_t in_width = spec.input_width();
  std::size_t side = 0;
  std::size_t crop_size = 0;
  if (run.crop.enabled) {
    side = patch_side(src_width);
    crop_size = static_cast<std::size_t>(run.crop.size);
    if (crop_size * crop_size != in_width || crop_size > side) {
      throw ConfigError("crop " + std::to_string(crop_size) +
                        " does not match model input width " +
                        std::to_string(in_width));
    }
  } else if (src_width != in_width) {
    throw ConfigError("task '" + task.name + "' has width " +
                      std::to_string(src_width) + ", model expects " +
                      std::to_string(in_width));
  }
  const nn::LabeledSet val = center_crop(task.val, run.crop);

  nn::OptimizerState opt;
  opt.lr_initial = run.lr_initial;
  opt.lr_min = run.lr_min;
  opt.momentum = run.momentum;
  opt.epoch_budget = run.max_epochs;
  opt.velocity.assign(params.size(), 0.0);

  // Per-coordinate sums of F and F * theta* over all anchors for the
  // proximal EWC step.
  const bool prox = ewc != nullptr && ewc->lambda > 0.0 && !anchors.empty();
  std::vector<double> fisher_sum;
  std::vector<double> fisher_anchor;
  if (prox) {
    fisher_sum.assign(params.size(), 0.0);
    fisher_anchor.assign(params.size(), 0.0);
    for (const auto& anchor : anchors) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        fisher_sum[i] += anchor.fisher_diag[i];
        fisher_anchor[i] += anchor.fisher_diag[i] * anchor.anchor_params[i];
      }
    }
  }

  TrainResult result;
  result.params = params;
  nn::ParamVector current = params;
  ValScore best = score(spec, current, val);

  std::mt19937_64 rng(run.seed);
  std::vector<std::size_t> order(task.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const std::size_t batch_size = static_cast<std::size_t>(run.batch_size);
  std::vector<double> batch_inputs;
  std::vector<int> batch_labels;
  batch_inputs.reserve(batch_size * in_width);
  batch_labels.reserve(batch_size);

  int stale = 0;
  for (int epoch = 0; epoch < run.max_epochs; ++epoch) {
    const double lr = nn::cosine_lr(epoch, opt);
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      batch_inputs.resize((end - start) * in_width);
      batch_labels.resize(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        double* dst = batch_inputs.data() + (k - start) * in_width;
        if (run.crop.enabled) {
          std::uniform_int_distribution<std::size_t> offset(0, side - crop_size);
          const std::size_t dx = offset(rng);
          const std::size_t dy = offset(rng);
          copy_crop(task.train.row(idx), side, crop_size, dx, dy, dst);
        } else {
          const auto row = task.train.row(idx);
          std::copy(row.begin(), row.end(), dst);
        }
        batch_labels[k - start] = task.train.labels[idx];
      }
      const nn::BatchView batch{in_width, batch_inputs, batch_labels};

      nn::Gradient grad;
      if (kd != nullptr) {
        const auto teacher_logits =
            nn::forward_batch(teacher->spec, teacher->params, batch);
        grad = nn::backward(
            spec, current, batch,
            [&](std::size_t i, const nn::Logits& logits) {
              return kd_loss_term(teacher_logits[i], logits, batch_labels[i],
                                  *kd);
            });
      } else {
        grad = nn::backward(spec, current, batch,
                            [&](std::size_t i, const nn::Logits& logits) {
                              return nn::cross_entropy_term(logits,
                                                            batch_labels[i]);
                            });
      }
      double loss = grad.loss;
      if (prox) loss += ewc_penalty(current, anchors, ewc->lambda);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss in epoch " +
                               std::to_string(epoch) + " of task '" +
                               task.name + "'",
                           epoch);
      }
      try {
        nn::sgd_step(current, grad.values, opt, lr);
      } catch (const NumericError&) {
        throw NumericError("non-finite gradient in epoch " +
                               std::to_string(epoch) + " of task '" +
                               task.name + "'",
                           epoch);
      }
      if (prox) {
        // Exact minimiser of |theta - y|^2 / (2 lr) + penalty(theta) around
        // the SGD iterate y; stable for any lambda * F.
        for (std::size_t i = 0; i < current.size(); ++i) {
          const double c = lr * ewc->lambda * fisher_sum[i];
          current[i] = (current[i] + lr * ewc->lambda * fisher_anchor[i]) /
                       (1.0 + c);
        }
      }
      loss_sum += loss;
      ++batches;
    }

    const ValScore val_score = score(spec, current, val);
    result.trace.epochs.push_back({epoch, lr,
                                   loss_sum / static_cast<double>(batches),
                                   val_score.accuracy, val_score.loss});
    if (!std::isfinite(val_score.loss)) {
      throw NumericError("non-finite validation loss in epoch " +
                             std::to_string(epoch),
                         epoch);
    }
    if (improves(val_score, best)) {
      best = val_score;
      result.params = current;
      result.trace.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= run.patience) {
      result.trace.stopped_early = true;
      break;
    }
  }
  return result;
}

SequenceResult train_sequence(const nn::ModelSpec& spec,
                              std::span<const TaskDataset> stream,
                              const Strategy& strategy,
                              const harness::RunConfig& run,
                              std::span<const TaskDataset> eval_tasks,
                              std::vector<std::size_t> seen_after_stage) {
  if (stream.empty()) throw ConfigError("task stream is empty");
  spec.validate();
  run.validate();
  validate(strategy);
  if (!seen_after_stage.empty() && seen_after_stage.size() != stream.size()) {
    throw ConfigError("seen_after_stage must have one entry per stage");
  }

  SequenceResult out;
  for (const auto& task : eval_tasks) out.matrix.task_names.push_back(task.name);
  out.matrix.seen_after_stage = std::move(seen_after_stage);

  std::vector<nn::LabeledSet> eval_sets;
  eval_sets.reserve(eval_tasks.size());
  for (const auto& task : eval_tasks) {
    if (task.test.empty()) {
      throw ConfigError("evaluation task '" + task.name + "' has no test split");
    }
    eval_sets.push_back(center_crop(task.test, run.crop));
  }

  nn::ParamVector params = nn::init_params(spec, derive_seed(run.seed, 0x1417));
  const auto* ewc = std::get_if<EWCConfig>(&strategy);
  for (std::size_t s = 0; s < stream.size(); ++s) {
    harness::RunConfig stage_run = run;
    stage_run.seed = stage_seed(run.seed, s);

    TrainResult trained;
    if (s == 0) {
      trained = train_task(spec, params, stream[s], Transfer{}, nullptr, {},
                           stage_run);
    } else {
      // The teacher is a frozen copy of the model before this stage.
      const Teacher teacher{spec, params};
      trained = train_task(spec, params, stream[s], strategy, &teacher,
                           out.anchors, stage_run);
    }
    params = std::move(trained.params);

    if (ewc != nullptr) {
      TaskAnchor anchor;
      anchor.anchor_params = params;
      anchor.fisher_diag =
          estimate_fisher(spec, params, center_crop(stream[s].train, run.crop),
                          *ewc, derive_seed(stage_run.seed, 0xF15E));
      anchor.task_name = stream[s].name;
      accumulate_anchor(out.anchors, std::move(anchor), ewc->accumulation);
    }

    std::vector<double> row;
    row.reserve(eval_sets.size());
    for (const auto& set : eval_sets) {
      row.push_back(nn::accuracy(spec, params, nn::BatchView::of(set)));
    }
    out.matrix.rows.push_back(std::move(row));
    out.matrix.stage_names.push_back(stream[s].name);
    out.checkpoints.push_back({stream[s].name, params, std::move(trained.trace)});
  }
  out.final_params = std::move(params);
  return out;
}

}  // namespace clfake::continual
