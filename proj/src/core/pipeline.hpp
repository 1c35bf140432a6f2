// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0
//
// In-process deployment loop: a versioned model registry, a serving path
// that feeds a drift monitor, and a retrain trigger that runs one continual
// training step per flagged window.

#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/continual.hpp"
#include "core/run_config.hpp"
#include "core/spectrum.hpp"
#include "core/taskgen.hpp"
#include "json.hpp"

namespace clfake::pipeline {

struct VersionMetadata {
  std::string strategy;
  std::vector<std::string> trained_on;
  std::uint64_t parent_version = 0;  // 0: none
  std::string timestamp;             // filled with UTC time when empty
};

struct RegistryEntry {
  std::uint64_t version = 0;
  std::shared_ptr<const checkpoint::Checkpoint> checkpoint;
  VersionMetadata metadata;
  std::uint64_t checksum = 0;  // of the parameters at registration
};

// Append-only store of checkpoints. With a directory, every mutation is
// persisted as v<N>.ckpt files plus index.json.
class ModelRegistry {
 public:
  ModelRegistry() = default;
  explicit ModelRegistry(std::filesystem::path dir);
  static ModelRegistry open(const std::filesystem::path& dir);
  // Moves take the source's lock; the moved-from registry is left empty.
  ModelRegistry(ModelRegistry&& other) noexcept;
  ModelRegistry& operator=(ModelRegistry&& other) noexcept;

  std::uint64_t register_checkpoint(checkpoint::Checkpoint ckpt,
                                    VersionMetadata metadata);
  void activate(std::uint64_t version);
  void rollback(std::uint64_t version) { activate(version); }

  std::uint64_t active_version() const;  // 0 when nothing is active
  std::shared_ptr<const checkpoint::Checkpoint> active() const;
  RegistryEntry entry(std::uint64_t version) const;
  std::vector<RegistryEntry> entries() const;
  std::size_t size() const;

 private:
  void persist_locked() const;

  mutable std::mutex mutex_;
  std::vector<RegistryEntry> entries_;
  std::uint64_t active_ = 0;
  std::optional<std::filesystem::path> dir_;
};

struct Prediction {
  int label = 0;
  double score = 0.0;  // P(fake) at temperature 1
};

Prediction predict(const checkpoint::Checkpoint& model,
                   std::span<const double> patch);

spectrum::Features extract_features(std::span<const double> patch);

struct ReferenceProfile {
  std::string feature_id = "fft-radial-8+mean+var";
  std::vector<std::vector<double>> sorted;  // per feature, ascending
  std::uint64_t source_version = 0;

  std::size_t size() const { return sorted.empty() ? 0 : sorted.front().size(); }
};

inline constexpr std::size_t kMinReferenceSize = 100;
inline constexpr std::size_t kMinWindowSize = 50;
inline constexpr double kDefaultDriftThreshold = 0.25;

ReferenceProfile make_profile(const std::vector<spectrum::Features>& samples,
                              std::uint64_t source_version);

// Two-sample Kolmogorov-Smirnov statistic of two ascending samples.
double ks_statistic(std::span<const double> a, std::span<const double> b);

struct DriftReport {
  std::uint64_t window_id = 0;
  std::vector<double> statistics;
  double max_statistic = 0.0;
  double threshold = kDefaultDriftThreshold;
  bool alert = false;
  std::size_t sample_count = 0;
};

DriftReport drift_detect(const ReferenceProfile& profile,
                         const std::vector<spectrum::Features>& window,
                         double threshold, std::uint64_t window_id = 0);

nlohmann::json to_json(const DriftReport& report);

struct PipelineConfig {
  continual::Strategy strategy = continual::KDConfig{};
  harness::RunConfig run;
  double drift_threshold = kDefaultDriftThreshold;
  std::size_t window_size = 200;
  // Retrained versions wait for approve() instead of going live.
  bool approval_mode = false;
  // Treat every window as unlabeled: alerts only fill the pending queue.
  bool pending_only = false;
  // Fraction of a flagged window used for training; the rest validates.
  double train_fraction = 0.75;

  void validate() const;
};

// {"strategy", "run", "drift_threshold", "window_size", "approval_mode",
// "pending_only", "train_fraction"}; missing keys keep their defaults,
// unknown keys are rejected.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineConfig& config);

struct Sample {
  std::vector<double> patch;
  int label = 0;
  bool label_available = true;
};

struct RetrainOutcome {
  std::uint64_t window_id = 0;
  std::uint64_t parent_version = 0;
  std::uint64_t new_version = 0;
  bool activated = false;
  continual::TrainingTrace trace;
};

using EventSink = std::function<void(const nlohmann::json&)>;

// Serving plus monitoring state. predict() may be called from several
// threads; a window that completes triggers drift detection and, on alert,
// retraining on the calling thread while other callers keep being served by
// the previous version.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, ModelRegistry& registry,
           EventSink sink = nullptr);

  // Trains v1 from scratch on `task`, registers and activates it, and builds
  // the reference profile from its training inputs.
  std::uint64_t bootstrap(const TaskDataset& task);

  Prediction predict(const Sample& sample);
  // Alert handling for a flagged window (normally called by predict).
  std::optional<RetrainOutcome> on_alert(std::uint64_t window_id,
                                         const std::vector<Sample>& window);
  // Activates a version waiting for approval.
  void approve(std::uint64_t version);

  std::size_t pending_count() const;
  // Retrains on the oldest pending window once labels have arrived.
  std::optional<RetrainOutcome> resolve_pending(std::vector<int> labels);

  const ReferenceProfile& reference() const { return reference_; }
  std::vector<DriftReport> drift_reports() const;
  const std::vector<continual::TaskAnchor>& anchors() const { return anchors_; }
  const std::vector<RetrainOutcome>& retrains() const { return retrains_; }

 private:
  void emit(const nlohmann::json& event);
  std::optional<RetrainOutcome> retrain(std::uint64_t window_id,
                                        const std::vector<Sample>& window);

  PipelineConfig config_;
  ModelRegistry& registry_;
  EventSink sink_;
  ReferenceProfile reference_;
  std::vector<continual::TaskAnchor> anchors_;

  mutable std::mutex window_mutex_;
  std::vector<Sample> window_;
  std::vector<spectrum::Features> window_features_;
  std::uint64_t next_window_id_ = 1;
  std::vector<DriftReport> reports_;
  std::deque<std::pair<std::uint64_t, std::vector<Sample>>> pending_;

  std::mutex train_mutex_;
  std::uint64_t retrain_count_ = 0;
  std::vector<RetrainOutcome> retrains_;
};

// One phase of a scenario script.
struct Phase {
  std::string generator_name;
  std::size_t count = 0;
  bool label_available = true;
};

std::vector<Phase> parse_scenario(const nlohmann::json& j);
std::vector<Phase> load_scenario(const std::filesystem::path& path);

struct PhaseAccuracy {
  std::string generator_name;
  double before = 0.0;  // active model when the phase starts streaming
  double after = 0.0;   // active model at the end of the scenario
};

struct ScenarioResult {
  std::vector<nlohmann::json> events;
  std::vector<PhaseAccuracy> phases;
  std::vector<RetrainOutcome> retrains;
  std::uint64_t final_version = 0;
};

// Bootstraps v1 on the first phase's generator, then streams every phase
// (balanced real/fake, shuffled) through predict. Held-out accuracy on all
// phases seen so far is logged before and after every retrain.
ScenarioResult run_scenario(const std::vector<Phase>& script,
                            const taskgen::Manifest& manifest,
                            const PipelineConfig& config,
                            ModelRegistry& registry, std::uint64_t seed,
                            const EventSink& sink = nullptr);

}  // namespace clfake::pipeline
