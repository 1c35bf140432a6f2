// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "core/continual.hpp"
#include "core/dataset.hpp"
#include "core/eval_matrix.hpp"
#include "core/nn.hpp"
#include "core/run_config.hpp"
#include "core/taskgen.hpp"

namespace clfake::harness {

// Model input width for patches under `run`: crop^2 when cropping, else the
// full patch.
std::size_t input_width(const RunConfig& run);

// Test-split accuracy; the split is center-cropped when `crop` is enabled.
double evaluate(const nn::ModelSpec& spec, const nn::ParamVector& params,
                const TaskDataset& task, const CropConfig& crop = {});

// Trains plain cross-entropy on `first_task` from a fresh model and scores
// every task in `all_tasks` (one row).
EvalMatrix zero_shot_eval(const nn::ModelSpec& spec, const RunConfig& run,
                          const TaskDataset& first_task,
                          std::span<const TaskDataset> all_tasks);

// out[t] = mean of rows[t][0 .. seen(t)).
std::vector<double> average_accuracy_curve(const EvalMatrix& m);

double round_half_away(double value, int decimals);
// Mean of percentages rounded half away from zero to 2 decimals.
double row_average(std::span<const double> percentages);

struct ForgettingReport {
  // f_j = max over earlier stages that had seen task j of rows[i][j], minus
  // the final rows[last][j]; 0 for tasks first seen in the last stage.
  std::vector<double> per_task;
  double mean = 0.0;
};
ForgettingReport forgetting(const EvalMatrix& m);

struct ExperimentOptions {
  // 0 = one stage per task; otherwise the sequence is merged into macro
  // tasks of this many generators.
  std::size_t group_size = 0;
  taskgen::GroupMode group_mode = taskgen::GroupMode::paper_order;
  nn::ModelSpec spec = nn::default_spec();
};

struct ExperimentResult {
  std::string strategy;
  EvalMatrix matrix;
  std::vector<double> curve;
  ForgettingReport forgetting;
  std::vector<continual::StageCheckpoint> checkpoints;
  double final_average = 0.0;  // mean of the last row over all tasks
};

// Index groups over manifest.sequence.task_names: the explicit grouping of
// the manifest when options.group_size is 0, else group_tasks. Empty when
// the run is ungrouped.
std::vector<std::vector<std::size_t>> resolve_groups(
    const taskgen::Manifest& manifest, const ExperimentOptions& options);

ExperimentResult run_experiment(const taskgen::Manifest& manifest,
                                const continual::Strategy& strategy,
                                const RunConfig& run,
                                const ExperimentOptions& options = {});

// `groups` partitions task indices into consecutive macro stages (empty:
// one stage per task). Stage names of macro stages join members with '+'.
ExperimentResult run_experiment(
    std::span<const TaskDataset> tasks, const continual::Strategy& strategy,
    const RunConfig& run, const std::vector<std::vector<std::size_t>>& groups,
    const nn::ModelSpec& spec = nn::default_spec());

}  // namespace clfake::harness
