// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace clfake::harness {

// rows[i][j] = test accuracy on task j after training stage i.
struct EvalMatrix {
  std::vector<std::string> task_names;
  std::vector<std::string> stage_names;
  std::vector<std::vector<double>> rows;
  // Number of tasks seen after each stage. Empty means stage i has seen
  // tasks 0..i, the ungrouped case.
  std::vector<std::size_t> seen_after_stage;

  std::size_t seen(std::size_t stage) const {
    return seen_after_stage.empty() ? stage + 1 : seen_after_stage.at(stage);
  }
  // Throws ConfigError on ragged rows or out-of-range entries.
  void validate() const;
};

}  // namespace clfake::harness
