// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#include "core/harness.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace clfake {

TaskDataset merge_tasks(const std::string& name,
                        const std::vector<const TaskDataset*>& parts) {
  if (parts.empty()) throw ConfigError("cannot merge zero tasks");
  TaskDataset merged;
  merged.name = name;
  merged.provenance = "merged";
  merged.train.width = merged.val.width = merged.test.width =
      parts.front()->train.width;
  for (const auto* part : parts) {
    merged.train.append(part->train);
    merged.val.append(part->val);
    merged.test.append(part->test);
  }
  return merged;
}

}  // namespace clfake

namespace clfake::harness {

void RunConfig::validate() const {
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (patience > max_epochs) {
    throw ConfigError("patience must not exceed max_epochs");
  }
  if (!(lr_initial > 0.0) || !std::isfinite(lr_initial)) {
    throw ConfigError("lr_initial must be positive");
  }
  if (!(lr_min > 0.0) || lr_min > lr_initial) {
    throw ConfigError("lr_min must lie in (0, lr_initial]");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (crop.enabled && crop.size < 1) throw ConfigError("crop size must be >= 1");
}

void to_json(nlohmann::json& j, const RunConfig& cfg) {
  j = {{"max_epochs", cfg.max_epochs},
       {"patience", cfg.patience},
       {"lr_initial", cfg.lr_initial},
       {"momentum", cfg.momentum},
       {"lr_min", cfg.lr_min},
       {"batch_size", cfg.batch_size},
       {"crop", {{"enabled", cfg.crop.enabled}, {"size", cfg.crop.size}}},
       {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, RunConfig& cfg) {
  static const std::set<std::string> known = {
      "max_epochs", "patience", "lr_initial", "momentum",
      "lr_min",     "batch_size", "crop",     "seed"};
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown run config key '" + key + "'");
  }
  try {
    if (j.contains("max_epochs")) cfg.max_epochs = j["max_epochs"].get<int>();
    if (j.contains("patience")) cfg.patience = j["patience"].get<int>();
    if (j.contains("lr_initial")) cfg.lr_initial = j["lr_initial"].get<double>();
    if (j.contains("momentum")) cfg.momentum = j["momentum"].get<double>();
    if (j.contains("lr_min")) cfg.lr_min = j["lr_min"].get<double>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("crop")) {
      const auto& c = j["crop"];
      if (c.is_boolean()) {
        cfg.crop.enabled = c.get<bool>();
      } else {
        for (const auto& [key, value] : c.items()) {
          if (key != "enabled" && key != "size") {
            throw ConfigError("unknown crop key '" + key + "'");
          }
        }
        cfg.crop.enabled = c.value("enabled", cfg.crop.enabled);
        cfg.crop.size = c.value("size", cfg.crop.size);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
  cfg.validate();
}

void EvalMatrix::validate() const {
  if (!seen_after_stage.empty() && seen_after_stage.size() != rows.size()) {
    throw ConfigError("seen_after_stage needs one entry per row");
  }
  if (!stage_names.empty() && stage_names.size() != rows.size()) {
    throw ConfigError("stage_names needs one entry per row");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != task_names.size()) {
      throw ConfigError("eval matrix row " + std::to_string(i) +
                        " has " + std::to_string(rows[i].size()) +
                        " entries, expected " +
                        std::to_string(task_names.size()));
    }
    for (double a : rows[i]) {
      if (!(a >= 0.0 && a <= 1.0)) {
        throw ConfigError("eval matrix entry outside [0, 1]");
      }
    }
    const std::size_t n = seen(i);
    if (n == 0 || n > task_names.size()) {
      throw ConfigError("stage " + std::to_string(i) +
                        " claims an impossible number of seen tasks");
    }
    if (i > 0 && n < seen(i - 1)) {
      throw ConfigError("seen task counts must not decrease");
    }
  }
}

std::size_t input_width(const RunConfig& run) {
  if (!run.crop.enabled) return kPatchPixels;
  const auto side = static_cast<std::size_t>(run.crop.size);
  return side * side;
}

double evaluate(const nn::ModelSpec& spec, const nn::ParamVector& params,
                const TaskDataset& task, const CropConfig& crop) {
  if (task.test.empty()) {
    throw ConfigError("task '" + task.name + "' has no test split");
  }
  const auto set = continual::center_crop(task.test, crop);
  return nn::accuracy(spec, params, nn::BatchView::of(set));
}

EvalMatrix zero_shot_eval(const nn::ModelSpec& spec, const RunConfig& run,
                          const TaskDataset& first_task,
                          std::span<const TaskDataset> all_tasks) {
  const bool listed =
      std::any_of(all_tasks.begin(), all_tasks.end(),
                  [&](const TaskDataset& t) { return t.name == first_task.name; });
  if (!listed) {
    throw ConfigError("training task '" + first_task.name +
                      "' is not among the evaluation tasks");
  }
  const auto init = nn::init_params(spec, derive_seed(run.seed, 0x1417));
  RunConfig stage_run = run;
  stage_run.seed = continual::stage_seed(run.seed, 0);
  const auto trained = continual::train_task(
      spec, init, first_task, continual::Transfer{}, nullptr, {}, stage_run);
  EvalMatrix m;
  m.stage_names = {first_task.name};
  m.seen_after_stage = {1};
  std::vector<double> row;
  for (const auto& task : all_tasks) {
    m.task_names.push_back(task.name);
    row.push_back(evaluate(spec, trained.params, task, run.crop));
  }
  m.rows.push_back(std::move(row));
  return m;
}

std::vector<double> average_accuracy_curve(const EvalMatrix& m) {
  m.validate();
  std::vector<double> curve;
  curve.reserve(m.rows.size());
  for (std::size_t t = 0; t < m.rows.size(); ++t) {
    const std::size_t n = m.seen(t);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += m.rows[t][j];
    curve.push_back(sum / static_cast<double>(n));
  }
  return curve;
}

double round_half_away(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // The nudge absorbs binary representation error of decimal inputs such as
  // 72.935 before rounding.
  const double scaled = value * scale;
  const double nudged = scaled + std::copysign(1e-9 * std::max(1.0, std::abs(scaled)), scaled);
  return std::round(nudged) / scale;
}

double row_average(std::span<const double> percentages) {
  if (percentages.empty()) throw ConfigError("row_average of an empty row");
  double sum = 0.0;
  for (double p : percentages) sum += p;
  return round_half_away(sum / static_cast<double>(percentages.size()), 2);
}

ForgettingReport forgetting(const EvalMatrix& m) {
  m.validate();
  ForgettingReport report;
  if (m.rows.empty()) return report;
  const std::size_t last = m.rows.size() - 1;
  report.per_task.assign(m.task_names.size(), 0.0);
  for (std::size_t j = 0; j < m.task_names.size(); ++j) {
    double best = -1.0;
    for (std::size_t i = 0; i < last; ++i) {
      if (j < m.seen(i)) best = std::max(best, m.rows[i][j]);
    }
    if (best >= 0.0) report.per_task[j] = best - m.rows[last][j];
  }
  double sum = 0.0;
  for (double f : report.per_task) sum += f;
  report.mean = sum / static_cast<double>(report.per_task.size());
  return report;
}

std::vector<std::vector<std::size_t>> resolve_groups(
    const taskgen::Manifest& manifest, const ExperimentOptions& options) {
  const auto& names = manifest.sequence.task_names;
  if (options.group_size == 0) {
    std::vector<std::vector<std::size_t>> groups;
    for (const auto& g : manifest.sequence.grouping) {
      std::vector<std::size_t> idx;
      for (const auto& n : g) {
        const auto it = std::find(names.begin(), names.end(), n);
        idx.push_back(static_cast<std::size_t>(it - names.begin()));
      }
      groups.push_back(std::move(idx));
    }
    return groups;
  }
  std::vector<taskgen::GeneratorSpec> specs;
  for (const auto& n : names) specs.push_back(manifest.generator(n));
  return taskgen::group_tasks(specs, options.group_size, options.group_mode);
}

ExperimentResult run_experiment(const taskgen::Manifest& manifest,
                                const continual::Strategy& strategy,
                                const RunConfig& run,
                                const ExperimentOptions& options) {
  manifest.validate();
  const auto tasks = manifest.materialize_all();
  return run_experiment(tasks, strategy, run, resolve_groups(manifest, options),
                        options.spec);
}

ExperimentResult run_experiment(
    std::span<const TaskDataset> tasks, const continual::Strategy& strategy,
    const RunConfig& run, const std::vector<std::vector<std::size_t>>& groups,
    const nn::ModelSpec& spec) {
  if (tasks.empty()) throw ConfigError("experiment has no tasks");
  ExperimentResult result;
  result.strategy = continual::strategy_name(strategy);

  continual::SequenceResult seq;
  if (groups.empty()) {
    seq = continual::train_sequence(spec, tasks, strategy, run, tasks);
  } else {
    // Evaluation columns follow the stage order so seen() counts a prefix.
    std::vector<TaskDataset> stream;
    std::vector<TaskDataset> eval;
    std::vector<std::size_t> seen;
    std::vector<bool> used(tasks.size(), false);
    for (const auto& g : groups) {
      if (g.empty()) throw ConfigError("empty task group");
      std::vector<const TaskDataset*> parts;
      std::string name;
      for (auto idx : g) {
        if (idx >= tasks.size() || used[idx]) {
          throw ConfigError("groups must partition the task list");
        }
        used[idx] = true;
        parts.push_back(&tasks[idx]);
        eval.push_back(tasks[idx]);
        name += (name.empty() ? "" : "+") + tasks[idx].name;
      }
      stream.push_back(merge_tasks(name, parts));
      seen.push_back(eval.size());
    }
    if (eval.size() != tasks.size()) {
      throw ConfigError("groups must cover every task");
    }
    seq = continual::train_sequence(spec, stream, strategy, run, eval,
                                    std::move(seen));
  }
  result.matrix = std::move(seq.matrix);
  result.curve = average_accuracy_curve(result.matrix);
  result.forgetting = forgetting(result.matrix);
  result.checkpoints = std::move(seq.checkpoints);
  const auto& last = result.matrix.rows.back();
  double sum = 0.0;
  for (double a : last) sum += a;
  result.final_average = sum / static_cast<double>(last.size());
  return result;
}

}  // namespace clfake::harness
