// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0
//
// Continual training of the binary detector over a stream of tasks with one of
// three strategies:
//
//   Transfer  plain fine-tuning on each new task (cross-entropy only).
//   KD        L = alpha * L_D + beta * L_S, where L_D is the cross-entropy
//             between the frozen teacher's and the student's softmax at
//             temperature tau, and L_S the label cross-entropy at tau = 1.
//   EWC       L = L_B + sum_i (lambda / 2) F_i (theta_i - theta*_i)^2 with a
//             diagonal Fisher F estimated after every completed task.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "core/dataset.hpp"
#include "core/eval_matrix.hpp"
#include "core/nn.hpp"
#include "core/run_config.hpp"

namespace clfake::continual {

struct KDConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double tau = 2.0;
  // Multiplies L_D by tau^2 (off by default).
  bool scale_by_tau_squared = false;

  void validate() const;
};

enum class Accumulation { per_task_list, running_sum };

struct EWCConfig {
  double lambda = 1000.0;
  int fisher_sample_count = 200;
  Accumulation accumulation = Accumulation::per_task_list;

  void validate() const;
};

struct Transfer {};

using Strategy = std::variant<Transfer, KDConfig, EWCConfig>;

std::string strategy_name(const Strategy& strategy);
void validate(const Strategy& strategy);

// (theta*, diagonal Fisher) snapshot taken after a task. `offset` is the
// constant left over when several quadratics are merged into one
// (running_sum); it keeps merged penalties equal to the per-task sum.
struct TaskAnchor {
  nn::ParamVector anchor_params;
  std::vector<double> fisher_diag;
  std::string task_name;
  double offset = 0.0;
};

struct Teacher {
  nn::ModelSpec spec;
  nn::ParamVector params;
};

// Positive cross-entropy -sum_c softmax(T/tau)_c log softmax(S/tau)_c.
double distill_term(const nn::Logits& teacher, const nn::Logits& student,
                    double tau);
double kd_loss(const nn::Logits& teacher, const nn::Logits& student, int label,
               const KDConfig& cfg);
// kd_loss together with its derivative with respect to the student logits.
nn::LossTerm kd_loss_term(const nn::Logits& teacher, const nn::Logits& student,
                          int label, const KDConfig& cfg);

double ewc_penalty(const nn::ParamVector& params,
                   std::span<const TaskAnchor> anchors, double lambda);
// grad_i += lambda * F_i * (theta_i - theta*_i), summed over anchors.
void add_ewc_gradient(std::span<double> gradient, const nn::ParamVector& params,
                      std::span<const TaskAnchor> anchors, double lambda);

// Empirical diagonal Fisher: mean squared gradient of log p(y|x) over
// min(fisher_sample_count, |set|) samples drawn without replacement.
std::vector<double> estimate_fisher(const nn::ModelSpec& spec,
                                    const nn::ParamVector& params,
                                    const nn::LabeledSet& set,
                                    const EWCConfig& cfg, std::uint64_t seed);

// Appends (per_task_list) or folds (running_sum) a new anchor.
void accumulate_anchor(std::vector<TaskAnchor>& anchors, TaskAnchor anchor,
                       Accumulation mode);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_loss = 0.0;
};

struct TrainingTrace {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;  // -1: the initial parameters were never improved on
  bool stopped_early = false;
};

struct TrainResult {
  nn::ParamVector params;
  TrainingTrace trace;
};

// Trains one task under `strategy`. KD needs `teacher`; EWC reads `anchors`
// (may be empty). Returns the best-validation parameters.
TrainResult train_task(const nn::ModelSpec& spec, const nn::ParamVector& params,
                       const TaskDataset& task, const Strategy& strategy,
                       const Teacher* teacher,
                       std::span<const TaskAnchor> anchors,
                       const harness::RunConfig& run);

struct StageCheckpoint {
  std::string stage_name;
  nn::ParamVector params;
  TrainingTrace trace;
};

struct SequenceResult {
  nn::ParamVector final_params;
  harness::EvalMatrix matrix;
  std::vector<StageCheckpoint> checkpoints;
  std::vector<TaskAnchor> anchors;
};

// Runs the stages in order. The first stage is always plain cross-entropy;
// later stages use `strategy`. After every stage all `eval_tasks` are scored on
// their test split. `seen_after_stage` is forwarded to the matrix (grouped
// runs); leave empty for one task per stage.
SequenceResult train_sequence(const nn::ModelSpec& spec,
                              std::span<const TaskDataset> stream,
                              const Strategy& strategy,
                              const harness::RunConfig& run,
                              std::span<const TaskDataset> eval_tasks,
                              std::vector<std::size_t> seen_after_stage = {});

// Seed for stage `stage` derived from the run seed.
std::uint64_t stage_seed(std::uint64_t run_seed, std::uint64_t stage);

// Center crop (eval) of a flattened square patch set; identity when disabled.
nn::LabeledSet center_crop(const nn::LabeledSet& set,
                           const harness::CropConfig& crop);

}  // namespace clfake::continual
