// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include "core/nn.hpp"

namespace clfake {

inline constexpr std::size_t kPatchSide = 32;
inline constexpr std::size_t kPatchPixels = kPatchSide * kPatchSide;

// One labeled task of the stream: patches are flattened 32x32 grids in
// [0, 1], label 0 = real, 1 = fake.
struct TaskDataset {
  std::string name;
  nn::LabeledSet train;
  nn::LabeledSet val;
  nn::LabeledSet test;
  // Generator name for synthetic tasks, "external" for ingested data.
  std::string provenance;
};

// Concatenates the splits of several tasks into one macro task.
TaskDataset merge_tasks(const std::string& name,
                        const std::vector<const TaskDataset*>& parts);

}  // namespace clfake
