// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic fake-media tasks. A "real" patch is smoothed Gaussian noise; a
// "fake" patch is the same kind of base plus a generator fingerprint, a sum of
// 2-D cosines at a few spectral bins. Generators of one family share a
// dominant bin, so detectors transfer within a family and fail across
// families.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "json.hpp"

namespace clfake::taskgen {

enum class Family { gan_like, cg_like, unknown_like };

std::string family_name(Family family);
Family parse_family(const std::string& name);

struct FingerprintComponent {
  int u = 0;
  int v = 0;
  double amplitude = 0.0;

  bool operator==(const FingerprintComponent&) const = default;
};

struct GeneratorSpec {
  std::string name;
  Family family = Family::gan_like;
  std::vector<FingerprintComponent> fingerprint;
  // Per-patch phase jitter of every component, in units of pi.
  double noise_level = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  double max_amplitude() const;

  bool operator==(const GeneratorSpec&) const = default;
};

using Patch = std::vector<double>;  // kPatchPixels values, row-major

// Phase of the cosine at spectral bin (u, v). Fixed per bin so generators
// sharing a bin share the spatial alignment of the artifact.
double bin_phase(int u, int v);

std::vector<Patch> synth_real(std::size_t count, std::uint64_t seed);
std::vector<Patch> synth_fake(const GeneratorSpec& gen, std::size_t count,
                              std::uint64_t seed);

struct SplitSizes {
  std::size_t train = 400;
  std::size_t val = 200;
  std::size_t test = 200;
};

TaskDataset make_task(const GeneratorSpec& gen, const SplitSizes& sizes,
                      std::uint64_t seed);

// Distance between L2-normalised amplitude spectra (0 = same spectrum).
double similarity(const GeneratorSpec& a, const GeneratorSpec& b);

enum class GroupMode { paper_order, greedy };

// Partition of indices into consecutive groups of `group_size` (the last may
// be smaller). paper_order keeps the given order; greedy seeds each group with
// the first unassigned generator and fills it with its nearest neighbours.
std::vector<std::vector<std::size_t>> group_tasks(
    const std::vector<GeneratorSpec>& specs, std::size_t group_size,
    GroupMode mode);

enum class PresetKind { easy_like, long_like };
PresetKind parse_preset(const std::string& name);
std::string preset_name(PresetKind kind);

struct SequenceSpec {
  std::vector<std::string> task_names;
  std::vector<std::vector<std::string>> grouping;  // empty when ungrouped

  void validate() const;
};

struct Preset {
  std::vector<GeneratorSpec> generators;
  SequenceSpec sequence;
};

Preset preset_sequence(PresetKind kind);

// Generators plus everything needed to regenerate the task data.
struct Manifest {
  std::string name;
  std::vector<GeneratorSpec> generators;
  SequenceSpec sequence;
  SplitSizes sizes;
  std::uint64_t data_seed = 0;

  void validate() const;
  const GeneratorSpec& generator(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;
  // Task data for generator `name`, independent of catalog order.
  TaskDataset materialize(const std::string& name) const;
  std::vector<TaskDataset> materialize_all() const;
};

Manifest make_manifest(PresetKind kind, std::uint64_t data_seed,
                       const SplitSizes& sizes = {});

nlohmann::json to_json(const Manifest& manifest);
Manifest manifest_from_json(const nlohmann::json& j);
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// <dir>/{train,val,test}/{real,fake}/*.pgm, binary 8-bit PGM of any size
// >= 32x32; center-cropped to a square and area-downscaled to 32x32.
TaskDataset load_directory(const std::filesystem::path& dir);
// Writes the same layout (8-bit quantised).
void write_directory(const TaskDataset& task, const std::filesystem::path& dir);

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;  // in [0, 1]
};
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, std::size_t width,
               std::size_t height, std::span<const double> pixels);
Patch to_patch(const GrayImage& image);

}  // namespace clfake::taskgen
