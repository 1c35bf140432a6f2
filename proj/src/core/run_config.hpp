// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "json.hpp"

namespace clfake::harness {

struct CropConfig {
  bool enabled = false;
  int size = 28;
};

// Training hyperparameters. Defaults follow the reference protocol: SGD with
// momentum 0.1, lr 0.005 cosine-annealed to 1e-5, early stopping with
// patience 35 up to 250 epochs.
struct RunConfig {
  int max_epochs = 250;
  int patience = 35;
  double lr_initial = 0.005;
  double momentum = 0.1;
  double lr_min = 1e-5;
  int batch_size = 64;
  CropConfig crop;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, RunConfig& cfg);

}  // namespace clfake::harness
