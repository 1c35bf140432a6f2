// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#include "core/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numeric>
#include <random>
#include <utility>

#include "core/errors.hpp"
#include "core/harness.hpp"
#include "core/rng.hpp"

namespace clfake::pipeline {
namespace fs = std::filesystem;
namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string version_file(std::uint64_t version) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "v%04llu.ckpt",
                static_cast<unsigned long long>(version));
  return buf;
}

nlohmann::json metadata_json(const VersionMetadata& m) {
  return {{"strategy", m.strategy},
          {"trained_on", m.trained_on},
          {"parent_version", m.parent_version},
          {"timestamp", m.timestamp}};
}

VersionMetadata metadata_from_json(const nlohmann::json& j) {
  VersionMetadata m;
  m.strategy = j.at("strategy").get<std::string>();
  m.trained_on = j.at("trained_on").get<std::vector<std::string>>();
  m.parent_version = j.at("parent_version").get<std::uint64_t>();
  m.timestamp = j.at("timestamp").get<std::string>();
  return m;
}

std::vector<spectrum::Features> features_of(const nn::LabeledSet& set) {
  std::vector<spectrum::Features> out;
  out.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    out.push_back(spectrum::features(set.row(i)));
  }
  return out;
}

nn::LabeledSet to_set(const std::vector<Sample>& samples, std::size_t begin,
                      std::size_t end) {
  nn::LabeledSet set;
  set.width = samples.empty() ? 0 : samples.front().patch.size();
  for (std::size_t i = begin; i < end; ++i) {
    set.push_back(samples[i].patch, samples[i].label);
  }
  return set;
}

}  // namespace

// ---- registry -------------------------------------------------------------

ModelRegistry::ModelRegistry(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(*dir_, ec);
  if (ec || !fs::is_directory(*dir_)) {
    throw IoError("cannot create registry directory " + dir_->string());
  }
  if (fs::exists(*dir_ / "index.json")) {
    throw IoError("registry " + dir_->string() +
                  " already exists; open it instead");
  }
  persist_locked();
}

ModelRegistry::ModelRegistry(ModelRegistry&& other) noexcept {
  std::lock_guard lock(other.mutex_);
  entries_ = std::move(other.entries_);
  active_ = std::exchange(other.active_, 0);
  dir_ = std::move(other.dir_);
  other.dir_.reset();
}

ModelRegistry& ModelRegistry::operator=(ModelRegistry&& other) noexcept {
  if (this != &other) {
    std::scoped_lock lock(mutex_, other.mutex_);
    entries_ = std::move(other.entries_);
    active_ = std::exchange(other.active_, 0);
    dir_ = std::move(other.dir_);
    other.dir_.reset();
  }
  return *this;
}

ModelRegistry ModelRegistry::open(const fs::path& dir) {
  std::ifstream in(dir / "index.json");
  if (!in) throw IoError("no registry index in " + dir.string());
  nlohmann::json index;
  try {
    in >> index;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("registry index is not valid JSON: " +
                          std::string(e.what()));
  }
  ModelRegistry reg;
  try {
    for (const auto& e : index.at("entries")) {
      RegistryEntry entry;
      entry.version = e.at("version").get<std::uint64_t>();
      entry.metadata = metadata_from_json(e.at("metadata"));
      entry.checksum = e.at("checksum").get<std::uint64_t>();
      auto ckpt = checkpoint::load(dir / e.at("file").get<std::string>());
      if (ckpt.params.checksum() != entry.checksum) {
        throw ValidationError("checkpoint of version " +
                              std::to_string(entry.version) +
                              " does not match the index checksum");
      }
      if (!reg.entries_.empty() && entry.version <= reg.entries_.back().version) {
        throw ValidationError("registry versions are not increasing");
      }
      entry.checkpoint =
          std::make_shared<const checkpoint::Checkpoint>(std::move(ckpt));
      reg.entries_.push_back(std::move(entry));
    }
    reg.active_ = index.at("active_version").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("registry index is malformed: " + std::string(e.what()));
  }
  if (reg.active_ != 0 &&
      std::none_of(reg.entries_.begin(), reg.entries_.end(),
                   [&](const RegistryEntry& e) { return e.version == reg.active_; })) {
    throw ValidationError("registry active version does not exist");
  }
  reg.dir_ = dir;
  return reg;
}

void ModelRegistry::persist_locked() const {
  if (!dir_) return;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : entries_) {
    const auto file = version_file(e.version);
    if (!fs::exists(*dir_ / file)) checkpoint::save(*e.checkpoint, *dir_ / file);
    entries.push_back({{"version", e.version},
                       {"file", file},
                       {"checksum", e.checksum},
                       {"metadata", metadata_json(e.metadata)}});
  }
  const nlohmann::json index = {{"format", "clfake-registry"},
                                {"active_version", active_},
                                {"entries", entries}};
  const auto tmp = *dir_ / "index.json.tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write registry index in " + dir_->string());
    out << index.dump(2) << '\n';
    if (!out) throw IoError("failed writing registry index");
  }
  fs::rename(tmp, *dir_ / "index.json");
}

std::uint64_t ModelRegistry::register_checkpoint(checkpoint::Checkpoint ckpt,
                                                 VersionMetadata metadata) {
  ckpt.validate();
  if (metadata.timestamp.empty()) metadata.timestamp = utc_now();
  std::lock_guard lock(mutex_);
  RegistryEntry entry;
  entry.version = entries_.empty() ? 1 : entries_.back().version + 1;
  entry.checksum = ckpt.params.checksum();
  entry.metadata = std::move(metadata);
  entry.checkpoint = std::make_shared<const checkpoint::Checkpoint>(std::move(ckpt));
  entries_.push_back(entry);
  persist_locked();
  return entry.version;
}

void ModelRegistry::activate(std::uint64_t version) {
  std::lock_guard lock(mutex_);
  const bool known =
      std::any_of(entries_.begin(), entries_.end(),
                  [&](const RegistryEntry& e) { return e.version == version; });
  if (!known) {
    throw NotFoundError("registry has no version " + std::to_string(version));
  }
  if (active_ == version) return;
  active_ = version;
  persist_locked();
}

std::uint64_t ModelRegistry::active_version() const {
  std::lock_guard lock(mutex_);
  return active_;
}

std::shared_ptr<const checkpoint::Checkpoint> ModelRegistry::active() const {
  std::lock_guard lock(mutex_);
  for (const auto& e : entries_) {
    if (e.version == active_) return e.checkpoint;
  }
  return nullptr;
}

RegistryEntry ModelRegistry::entry(std::uint64_t version) const {
  std::lock_guard lock(mutex_);
  for (const auto& e : entries_) {
    if (e.version == version) return e;
  }
  throw NotFoundError("registry has no version " + std::to_string(version));
}

std::vector<RegistryEntry> ModelRegistry::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t ModelRegistry::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

// ---- serving and drift ----------------------------------------------------

Prediction predict(const checkpoint::Checkpoint& model,
                   std::span<const double> patch) {
  if (patch.size() != model.spec.input_width()) {
    throw ConfigError("patch has " + std::to_string(patch.size()) +
                      " values, model expects " +
                      std::to_string(model.spec.input_width()));
  }
  const auto logits = nn::forward(model.spec, model.params, patch);
  return {nn::predicted_label(logits), nn::softmax_temp(logits, 1.0)[1]};
}

spectrum::Features extract_features(std::span<const double> patch) {
  return spectrum::features(patch);
}

ReferenceProfile make_profile(const std::vector<spectrum::Features>& samples,
                              std::uint64_t source_version) {
  if (samples.size() < kMinReferenceSize) {
    throw InsufficientDataError("reference profile needs at least " +
                                std::to_string(kMinReferenceSize) +
                                " samples, got " +
                                std::to_string(samples.size()));
  }
  ReferenceProfile profile;
  profile.source_version = source_version;
  profile.sorted.assign(spectrum::kFeatureCount, {});
  for (std::size_t f = 0; f < spectrum::kFeatureCount; ++f) {
    auto& col = profile.sorted[f];
    col.reserve(samples.size());
    for (const auto& s : samples) {
      if (!std::isfinite(s[f])) throw NumericError("non-finite drift feature");
      col.push_back(s[f]);
    }
    std::sort(col.begin(), col.end());
  }
  return profile;
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InsufficientDataError("KS needs samples");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na -
                             static_cast<double>(j) / nb));
  }
  return d;
}

DriftReport drift_detect(const ReferenceProfile& profile,
                         const std::vector<spectrum::Features>& window,
                         double threshold, std::uint64_t window_id) {
  if (window.size() < kMinWindowSize) {
    throw InsufficientDataError("drift window needs at least " +
                                std::to_string(kMinWindowSize) +
                                " samples, got " + std::to_string(window.size()));
  }
  if (profile.size() < kMinReferenceSize ||
      profile.sorted.size() != spectrum::kFeatureCount) {
    throw InsufficientDataError("reference profile is too small");
  }
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ConfigError("drift threshold must lie in (0, 1]");
  }
  DriftReport report;
  report.window_id = window_id;
  report.threshold = threshold;
  report.sample_count = window.size();
  std::vector<double> col(window.size());
  for (std::size_t f = 0; f < spectrum::kFeatureCount; ++f) {
    for (std::size_t i = 0; i < window.size(); ++i) col[i] = window[i][f];
    std::sort(col.begin(), col.end());
    const double d = ks_statistic(profile.sorted[f], col);
    report.statistics.push_back(d);
    report.max_statistic = std::max(report.max_statistic, d);
  }
  report.alert = report.max_statistic > threshold;
  return report;
}

nlohmann::json to_json(const DriftReport& report) {
  return {{"window_id", report.window_id},
          {"statistics", report.statistics},
          {"max_statistic", report.max_statistic},
          {"threshold", report.threshold},
          {"alert", report.alert},
          {"sample_count", report.sample_count}};
}

// ---- pipeline -------------------------------------------------------------

void PipelineConfig::validate() const {
  continual::validate(strategy);
  run.validate();
  if (run.crop.enabled) {
    throw ConfigError("the serving pipeline scores whole patches; disable crop");
  }
  if (!(drift_threshold > 0.0 && drift_threshold <= 1.0)) {
    throw ConfigError("drift threshold must lie in (0, 1]");
  }
  // A flagged window becomes the next reference profile.
  if (window_size < kMinReferenceSize) {
    throw ConfigError("window size must be at least " +
                      std::to_string(kMinReferenceSize));
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
  PipelineConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "strategy") {
        cfg.strategy = checkpoint::strategy_from_json(value);
      } else if (key == "run") {
        cfg.run = value.get<harness::RunConfig>();
      } else if (key == "drift_threshold") {
        cfg.drift_threshold = value.get<double>();
      } else if (key == "window_size") {
        cfg.window_size = value.get<std::size_t>();
      } else if (key == "approval_mode") {
        cfg.approval_mode = value.get<bool>();
      } else if (key == "pending_only") {
        cfg.pending_only = value.get<bool>();
      } else if (key == "train_fraction") {
        cfg.train_fraction = value.get<double>();
      } else {
        throw ConfigError("unknown pipeline config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad pipeline config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const PipelineConfig& config) {
  return {{"strategy", checkpoint::strategy_to_json(config.strategy)},
          {"run", config.run},
          {"drift_threshold", config.drift_threshold},
          {"window_size", config.window_size},
          {"approval_mode", config.approval_mode},
          {"pending_only", config.pending_only},
          {"train_fraction", config.train_fraction}};
}

Pipeline::Pipeline(PipelineConfig config, ModelRegistry& registry,
                   EventSink sink)
    : config_(std::move(config)), registry_(registry), sink_(std::move(sink)) {
  config_.validate();
}

void Pipeline::emit(const nlohmann::json& event) {
  if (sink_) sink_(event);
}

std::uint64_t Pipeline::bootstrap(const TaskDataset& task) {
  std::lock_guard train_lock(train_mutex_);
  const auto spec = nn::default_spec(task.train.width);
  const auto init = nn::init_params(spec, derive_seed(config_.run.seed, 0x1417));
  harness::RunConfig run = config_.run;
  run.seed = continual::stage_seed(config_.run.seed, 0);
  auto trained = continual::train_task(spec, init, task, continual::Transfer{},
                                       nullptr, {}, run);
  checkpoint::Checkpoint ckpt;
  ckpt.spec = spec;
  ckpt.params = trained.params;
  ckpt.strategy = continual::Transfer{};
  ckpt.seed = run.seed;
  ckpt.trace = std::move(trained.trace);
  ckpt.metadata = {{"task", task.name}};
  VersionMetadata meta{"transfer", {task.name}, 0, {}};
  const auto version = registry_.register_checkpoint(ckpt, meta);
  registry_.activate(version);

  if (const auto* ewc = std::get_if<continual::EWCConfig>(&config_.strategy)) {
    anchors_.clear();
    continual::TaskAnchor anchor;
    anchor.anchor_params = ckpt.params;
    anchor.fisher_diag = continual::estimate_fisher(
        spec, ckpt.params, task.train, *ewc, derive_seed(run.seed, 0xF15E));
    anchor.task_name = task.name;
    continual::accumulate_anchor(anchors_, std::move(anchor), ewc->accumulation);
  }
  reference_ = make_profile(features_of(task.train), version);
  emit({{"event", "bootstrap"},
        {"version", version},
        {"task", task.name},
        {"best_epoch", ckpt.trace.best_epoch}});
  return version;
}

Prediction Pipeline::predict(const Sample& sample) {
  const auto model = registry_.active();
  if (!model) throw UnavailableError("no active model to serve predictions");
  const Prediction pred = pipeline::predict(*model, sample.patch);
  const auto features = extract_features(sample.patch);

  std::vector<Sample> full;
  std::vector<spectrum::Features> full_features;
  std::uint64_t window_id = 0;
  {
    std::lock_guard lock(window_mutex_);
    window_.push_back(sample);
    window_features_.push_back(features);
    if (window_.size() < config_.window_size) return pred;
    full.swap(window_);
    full_features.swap(window_features_);
    window_id = next_window_id_++;
  }
  const auto report =
      drift_detect(reference_, full_features, config_.drift_threshold, window_id);
  {
    std::lock_guard lock(window_mutex_);
    reports_.push_back(report);
  }
  auto event = to_json(report);
  event["event"] = "drift";
  event["active_version"] = registry_.active_version();
  emit(event);
  if (report.alert) {
    emit({{"event", "alert"}, {"window_id", window_id}});
    on_alert(window_id, full);
  }
  return pred;
}

std::optional<RetrainOutcome> Pipeline::on_alert(std::uint64_t window_id,
                                                 const std::vector<Sample>& window) {
  const bool labeled =
      !config_.pending_only &&
      std::all_of(window.begin(), window.end(),
                  [](const Sample& s) { return s.label_available; });
  if (!labeled) {
    {
      std::lock_guard lock(window_mutex_);
      pending_.emplace_back(window_id, window);
    }
    emit({{"event", "pending"}, {"window_id", window_id},
          {"queue_length", pending_count()}});
    return std::nullopt;
  }
  return retrain(window_id, window);
}

std::size_t Pipeline::pending_count() const {
  std::lock_guard lock(window_mutex_);
  return pending_.size();
}

std::optional<RetrainOutcome> Pipeline::resolve_pending(std::vector<int> labels) {
  std::pair<std::uint64_t, std::vector<Sample>> item;
  {
    std::lock_guard lock(window_mutex_);
    if (pending_.empty()) return std::nullopt;
    if (labels.size() != pending_.front().second.size()) {
      throw ConfigError("label count does not match the pending window");
    }
    item = std::move(pending_.front());
    pending_.pop_front();
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ConfigError("labels must be 0 or 1");
    item.second[i].label = labels[i];
    item.second[i].label_available = true;
  }
  return retrain(item.first, item.second);
}

std::optional<RetrainOutcome> Pipeline::retrain(std::uint64_t window_id,
                                                const std::vector<Sample>& window) {
  std::lock_guard train_lock(train_mutex_);
  const auto parent_version = registry_.active_version();
  const auto parent = registry_.active();
  if (!parent) throw UnavailableError("no active model to retrain");

  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(config_.train_fraction *
                                           static_cast<double>(window.size()))),
      1, window.size() - 1);
  TaskDataset task;
  task.name = "window-" + std::to_string(window_id);
  task.provenance = "stream";
  task.train = to_set(window, 0, n_train);
  task.val = to_set(window, n_train, window.size());
  task.test = task.val;

  harness::RunConfig run = config_.run;
  run.seed = derive_seed(config_.run.seed, 0x7e7a0000u + ++retrain_count_);
  const continual::Teacher teacher{parent->spec, parent->params};
  auto trained = continual::train_task(parent->spec, parent->params, task,
                                       config_.strategy, &teacher, anchors_, run);

  checkpoint::Checkpoint ckpt;
  ckpt.spec = parent->spec;
  ckpt.params = trained.params;
  ckpt.strategy = config_.strategy;
  ckpt.seed = run.seed;
  ckpt.trace = trained.trace;
  ckpt.metadata = {{"task", task.name}, {"window_id", window_id}};
  VersionMetadata meta{continual::strategy_name(config_.strategy),
                       {task.name}, parent_version, {}};
  RetrainOutcome outcome;
  outcome.window_id = window_id;
  outcome.parent_version = parent_version;
  outcome.new_version = registry_.register_checkpoint(ckpt, meta);
  outcome.trace = std::move(trained.trace);
  emit({{"event", "register"},
        {"version", outcome.new_version},
        {"parent_version", parent_version},
        {"trained_on", task.name},
        {"best_epoch", outcome.trace.best_epoch}});

  if (const auto* ewc = std::get_if<continual::EWCConfig>(&config_.strategy)) {
    continual::TaskAnchor anchor;
    anchor.anchor_params = ckpt.params;
    anchor.fisher_diag = continual::estimate_fisher(
        ckpt.spec, ckpt.params, task.train, *ewc, derive_seed(run.seed, 0xF15E));
    anchor.task_name = task.name;
    continual::accumulate_anchor(anchors_, std::move(anchor), ewc->accumulation);
  }
  std::vector<spectrum::Features> feats;
  feats.reserve(window.size());
  for (const auto& s : window) feats.push_back(extract_features(s.patch));
  reference_ = make_profile(feats, outcome.new_version);

  if (!config_.approval_mode) {
    registry_.activate(outcome.new_version);
    outcome.activated = true;
    emit({{"event", "activate"}, {"version", outcome.new_version}});
  } else {
    emit({{"event", "awaiting_approval"}, {"version", outcome.new_version}});
  }
  retrains_.push_back(outcome);
  return outcome;
}

void Pipeline::approve(std::uint64_t version) {
  registry_.activate(version);
  emit({{"event", "activate"}, {"version", version}, {"approved", true}});
}

std::vector<DriftReport> Pipeline::drift_reports() const {
  std::lock_guard lock(window_mutex_);
  return reports_;
}

// ---- scenarios ------------------------------------------------------------

std::vector<Phase> parse_scenario(const nlohmann::json& j) {
  const auto& list = j.is_object() ? j.at("phases") : j;
  if (!list.is_array() || list.empty()) {
    throw ConfigError("scenario must be a non-empty list of phases");
  }
  std::vector<Phase> phases;
  try {
    for (const auto& p : list) {
      for (const auto& [key, value] : p.items()) {
        if (key != "generator_name" && key != "count" && key != "label_available") {
          throw ConfigError("unknown scenario phase key '" + key + "'");
        }
      }
      Phase phase;
      phase.generator_name = p.at("generator_name").get<std::string>();
      phase.count = p.at("count").get<std::size_t>();
      phase.label_available = p.value("label_available", true);
      if (phase.count == 0) throw ConfigError("scenario phase count must be >= 1");
      phases.push_back(std::move(phase));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
  return phases;
}

std::vector<Phase> load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario " + path.string() + " is not valid JSON: " +
                      e.what());
  }
  return parse_scenario(j);
}

ScenarioResult run_scenario(const std::vector<Phase>& script,
                            const taskgen::Manifest& manifest,
                            const PipelineConfig& config,
                            ModelRegistry& registry, std::uint64_t seed,
                            const EventSink& sink) {
  if (script.empty()) throw ConfigError("scenario has no phases");
  for (const auto& p : script) manifest.generator(p.generator_name);

  ScenarioResult result;
  auto log = [&](const nlohmann::json& event) {
    result.events.push_back(event);
    if (sink) sink(event);
  };
  PipelineConfig cfg = config;
  cfg.run.seed = derive_seed(seed, 0x9199);
  Pipeline pipe(cfg, registry, log);

  // Held-out evaluation sets, one per phase.
  std::vector<TaskDataset> evals;
  for (std::size_t p = 0; p < script.size(); ++p) {
    const auto& gen = manifest.generator(script[p].generator_name);
    taskgen::SplitSizes sizes{2, 2, 200};
    evals.push_back(taskgen::make_task(gen, sizes, derive_seed(seed, 0xE7A10000u + p)));
  }
  auto accuracy_on = [&](std::size_t p) {
    const auto model = registry.active();
    return harness::evaluate(model->spec, model->params, evals[p]);
  };
  auto log_accuracy = [&](std::size_t upto, const char* when) {
    nlohmann::json acc = nlohmann::json::object();
    for (std::size_t q = 0; q <= upto; ++q) {
      acc[std::to_string(q) + ":" + script[q].generator_name] = accuracy_on(q);
    }
    log({{"event", "accuracy"},
         {"when", when},
         {"version", registry.active_version()},
         {"phases", acc}});
  };

  const auto& first = manifest.generator(script.front().generator_name);
  pipe.bootstrap(taskgen::make_task(first, manifest.sizes, derive_seed(seed, 0xB007)));

  result.phases.resize(script.size());
  std::size_t retrains_seen = 0;
  for (std::size_t p = 0; p < script.size(); ++p) {
    const auto& phase = script[p];
    const auto& gen = manifest.generator(phase.generator_name);
    result.phases[p].generator_name = phase.generator_name;
    result.phases[p].before = accuracy_on(p);
    log({{"event", "phase_start"},
         {"phase", p},
         {"generator", phase.generator_name},
         {"count", phase.count},
         {"label_available", phase.label_available},
         {"active_version", registry.active_version()}});

    const std::size_t n_real = phase.count / 2;
    const std::size_t n_fake = phase.count - n_real;
    const auto stream_seed = derive_seed(seed, 0x57EA0000u + p);
    std::vector<Sample> samples;
    samples.reserve(phase.count);
    if (n_real > 0) {
      for (auto& patch : taskgen::synth_real(n_real, derive_seed(stream_seed, 0))) {
        samples.push_back({std::move(patch), 0, phase.label_available});
      }
    }
    for (auto& patch : taskgen::synth_fake(gen, n_fake, derive_seed(stream_seed, 1))) {
      samples.push_back({std::move(patch), 1, phase.label_available});
    }
    std::mt19937_64 shuffle_rng(derive_seed(stream_seed, 2));
    std::shuffle(samples.begin(), samples.end(), shuffle_rng);

    std::size_t correct = 0;
    for (const auto& s : samples) {
      const auto version_before = registry.active_version();
      if (pipe.predict(s).label == s.label) ++correct;
      if (registry.active_version() != version_before ||
          pipe.retrains().size() > retrains_seen) {
        retrains_seen = pipe.retrains().size();
        log_accuracy(p, "after_retrain");
      }
    }
    log({{"event", "phase_end"},
         {"phase", p},
         {"served_accuracy", static_cast<double>(correct) /
                                 static_cast<double>(samples.size())},
         {"pending", pipe.pending_count()}});
  }
  for (std::size_t p = 0; p < script.size(); ++p) {
    result.phases[p].after = accuracy_on(p);
  }
  log_accuracy(script.size() - 1, "final");
  result.retrains = pipe.retrains();
  result.final_version = registry.active_version();
  return result;
}

}  // namespace clfake::pipeline
