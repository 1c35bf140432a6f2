// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0
//
// Versioned binary checkpoint container:
//
//   "CLFKCKPT" | u32 version | u64 n | n bytes of JSON header |
//   u64 count | count little-endian IEEE-754 doubles | u64 FNV-1a of all
//   preceding bytes
//
// The header carries the model spec, strategy, seed, trace and free-form
// metadata. Parameters round-trip bit-exactly.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "core/continual.hpp"
#include "core/nn.hpp"
#include "json.hpp"

namespace clfake::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

struct Checkpoint {
  nn::ModelSpec spec;
  nn::ParamVector params;
  continual::Strategy strategy = continual::Transfer{};
  std::uint64_t seed = 0;
  continual::TrainingTrace trace;
  nlohmann::json metadata = nlohmann::json::object();

  // Throws ValidationError when params do not fit spec or are not finite.
  void validate() const;
};

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
// Throws ValidationError on bad magic, version, truncation or checksum.
Checkpoint deserialize(std::span<const std::uint8_t> bytes);

void save(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load(const std::filesystem::path& path);

nlohmann::json spec_to_json(const nn::ModelSpec& spec);
nn::ModelSpec spec_from_json(const nlohmann::json& j);
nlohmann::json strategy_to_json(const continual::Strategy& strategy);
// {"name": "transfer" | "kd" | "ewc", ...coefficients}; missing
// coefficients take the defaults, unknown keys are rejected.
continual::Strategy strategy_from_json(const nlohmann::json& j);
nlohmann::json trace_to_json(const continual::TrainingTrace& trace);
continual::TrainingTrace trace_from_json(const nlohmann::json& j);

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes);

}  // namespace clfake::checkpoint
