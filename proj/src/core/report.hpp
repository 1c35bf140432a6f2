// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0
//
// Report artifacts of one or more experiment runs over the same tasks:
//
//   eval_matrix.csv  strategy,stage,<task...>   one row per (strategy, stage)
//   curves.csv       strategy,stage,seen,average_accuracy
//   summary.json     final accuracies, Table-style averages, forgetting
//   curves.svg       average-accuracy curve, one polyline per strategy
//   table.md         final-stage accuracies in percent, column maxima bold
//
// Numbers are printed with '.' decimals and six fractional digits, lines end
// in '\n', so identical runs give identical bytes on every platform.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "core/harness.hpp"
#include "json.hpp"

namespace clfake::report {

struct StrategyCurves {
  std::string strategy;
  std::vector<std::string> stage_names;
  std::vector<std::size_t> seen;
  std::vector<double> curve;
  std::vector<std::string> task_names;
  std::vector<double> final_row;
};

std::string format_fixed(double value, int decimals = 6);

std::string eval_matrix_csv(const std::vector<harness::ExperimentResult>& results);
std::string curves_csv(const std::vector<harness::ExperimentResult>& results);
nlohmann::json summary(const std::vector<harness::ExperimentResult>& results);

// Writes every artifact; `context` (manifest, run config, ...) is stored under
// "context" in summary.json. Throws IoError when out_dir is not writable.
void emit_report(const std::vector<harness::ExperimentResult>& results,
                 const std::filesystem::path& out_dir,
                 const nlohmann::json& context = nlohmann::json::object());

// Re-reads eval_matrix.csv and curves.csv from `dir` and rewrites curves.svg
// and table.md.
void regenerate(const std::filesystem::path& dir);

std::vector<StrategyCurves> read_curves(const std::filesystem::path& dir);
std::string render_svg(const std::vector<StrategyCurves>& curves);
std::string render_table(const std::vector<StrategyCurves>& curves);

}  // namespace clfake::report
