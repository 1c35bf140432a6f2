// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#include "clfake/clfake.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/continual.hpp"
#include "core/errors.hpp"
#include "core/harness.hpp"
#include "core/pipeline.hpp"
#include "core/report.hpp"
#include "core/rng.hpp"
#include "core/taskgen.hpp"

using namespace clfake;

struct clf_model {
  checkpoint::Checkpoint ckpt;
  // EWC anchors collected by clf_train on this handle (not persisted).
  std::vector<continual::TaskAnchor> anchors;
  std::size_t stages = 0;
};

struct clf_manifest {
  taskgen::Manifest manifest;
};

struct clf_task {
  TaskDataset task;
};

struct clf_experiment {
  harness::ExperimentResult result;
  nn::ModelSpec spec;
  nlohmann::json context;
};

struct clf_registry {
  pipeline::ModelRegistry registry;
};

namespace {

thread_local std::string g_last_error;

class BadArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

clf_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return CLF_ERR_CONFIG;
    case ErrorKind::domain: return CLF_ERR_DOMAIN;
    case ErrorKind::numeric: return CLF_ERR_NUMERIC;
    case ErrorKind::io: return CLF_ERR_IO;
    case ErrorKind::ingestion: return CLF_ERR_INGESTION;
    case ErrorKind::not_found: return CLF_ERR_NOT_FOUND;
    case ErrorKind::unavailable: return CLF_ERR_UNAVAILABLE;
    case ErrorKind::validation: return CLF_ERR_VALIDATION;
    case ErrorKind::insufficient_data: return CLF_ERR_INSUFFICIENT_DATA;
  }
  return CLF_ERR_INTERNAL;
}

template <typename F>
clf_status guarded(F&& body) noexcept {
  try {
    body();
    g_last_error.clear();
    return CLF_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const BadArgument& e) {
    g_last_error = e.what();
    return CLF_ERR_INVALID_ARGUMENT;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return CLF_ERR_INVALID_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CLF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CLF_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return CLF_ERR_INTERNAL;
  }
}

template <typename T>
void require(const T* p, const char* what) {
  if (p == nullptr) throw BadArgument(std::string(what) + " must not be null");
}

nlohmann::json parse_json(const char* text, const char* what) {
  if (text == nullptr) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw BadArgument(std::string(what) + " is not valid JSON: " + e.what());
  }
}

harness::RunConfig parse_run(const char* text) {
  const auto j = parse_json(text, "run config");
  harness::RunConfig run;
  try {
    run = j.get<harness::RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad run config: ") + e.what());
  }
  run.validate();
  return run;
}

continual::Strategy parse_strategy(const char* text) {
  if (text == nullptr) return continual::Transfer{};
  auto s = checkpoint::strategy_from_json(parse_json(text, "strategy"));
  continual::validate(s);
  return s;
}

char* copy_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

const nn::LabeledSet& split_of(const TaskDataset& task, int split) {
  switch (split) {
    case 0: return task.train;
    case 1: return task.val;
    case 2: return task.test;
    default: throw BadArgument("split must be 0 (train), 1 (val) or 2 (test)");
  }
}

nn::LabeledSet make_set(const double* inputs, const int* labels,
                        std::size_t count, std::size_t width) {
  if (count > 0) {
    require(inputs, "inputs");
    require(labels, "labels");
  }
  nn::LabeledSet set;
  set.width = width;
  set.inputs.assign(inputs, inputs + count * width);
  set.labels.assign(labels, labels + count);
  for (int l : set.labels) {
    if (l != 0 && l != 1) throw BadArgument("labels must be 0 or 1");
  }
  return set;
}

void check_width(const nn::ModelSpec& spec, std::size_t width) {
  if (width != spec.input_width()) {
    throw BadArgument("input width " + std::to_string(width) +
                      " does not match the model (" +
                      std::to_string(spec.input_width()) + ")");
  }
}

clf_model* new_model(nn::ModelSpec spec, nn::ParamVector params,
                     std::uint64_t seed) {
  auto m = std::make_unique<clf_model>();
  m->ckpt.spec = std::move(spec);
  m->ckpt.params = std::move(params);
  m->ckpt.seed = seed;
  return m.release();
}

}  // namespace

extern "C" {

const char* clf_version(void) { return "0.3.0"; }

const char* clf_status_name(clf_status status) {
  switch (status) {
    case CLF_OK: return "ok";
    case CLF_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case CLF_ERR_CONFIG: return "config";
    case CLF_ERR_DOMAIN: return "domain";
    case CLF_ERR_NUMERIC: return "numeric";
    case CLF_ERR_IO: return "io";
    case CLF_ERR_INGESTION: return "ingestion";
    case CLF_ERR_NOT_FOUND: return "not_found";
    case CLF_ERR_UNAVAILABLE: return "unavailable";
    case CLF_ERR_VALIDATION: return "validation";
    case CLF_ERR_INSUFFICIENT_DATA: return "insufficient_data";
    case CLF_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* clf_last_error(void) { return g_last_error.c_str(); }

void clf_string_free(char* s) { std::free(s); }

// ---- models ---------------------------------------------------------------

clf_status clf_model_create(const size_t* widths, size_t count, uint64_t seed,
                            clf_model** out) {
  return guarded([&] {
    require(widths, "widths");
    require(out, "out");
    nn::ModelSpec spec;
    spec.layer_widths.assign(widths, widths + count);
    spec.validate();
    *out = new_model(spec, nn::init_params(spec, seed), seed);
  });
}

clf_status clf_model_create_default(uint64_t seed, clf_model** out) {
  return guarded([&] {
    require(out, "out");
    const auto spec = nn::default_spec();
    *out = new_model(spec, nn::init_params(spec, seed), seed);
  });
}

clf_status clf_model_clone(const clf_model* model, clf_model** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = new clf_model(*model);
  });
}

void clf_model_destroy(clf_model* model) { delete model; }

clf_status clf_model_save(const clf_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    checkpoint::save(model->ckpt, path);
  });
}

clf_status clf_model_load(const char* path, clf_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto m = std::make_unique<clf_model>();
    m->ckpt = checkpoint::load(path);
    *out = m.release();
  });
}

clf_status clf_model_input_width(const clf_model* model, size_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->ckpt.spec.input_width();
  });
}

clf_status clf_model_param_count(const clf_model* model, size_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->ckpt.params.size();
  });
}

clf_status clf_model_get_params(const clf_model* model, double* out,
                                size_t count) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    if (count != model->ckpt.params.size()) {
      throw BadArgument("buffer holds " + std::to_string(count) +
                        " values, the model has " +
                        std::to_string(model->ckpt.params.size()));
    }
    std::memcpy(out, model->ckpt.params.data(), count * sizeof(double));
  });
}

clf_status clf_model_set_params(clf_model* model, const double* values,
                                size_t count) {
  return guarded([&] {
    require(model, "model");
    require(values, "values");
    if (count != model->ckpt.params.size()) {
      throw BadArgument("expected " + std::to_string(model->ckpt.params.size()) +
                        " values, got " + std::to_string(count));
    }
    nn::ParamVector p(std::vector<double>(values, values + count));
    if (!p.all_finite()) throw ValidationError("parameters must be finite");
    model->ckpt.params = std::move(p);
  });
}

clf_status clf_model_checksum(const clf_model* model, uint64_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->ckpt.params.checksum();
  });
}

clf_status clf_model_info(const clf_model* model, char** json_out) {
  return guarded([&] {
    require(model, "model");
    require(json_out, "json_out");
    const auto& c = model->ckpt;
    nlohmann::json j = {{"spec", checkpoint::spec_to_json(c.spec)},
                        {"param_count", c.params.size()},
                        {"strategy", checkpoint::strategy_to_json(c.strategy)},
                        {"seed", c.seed},
                        {"trace", checkpoint::trace_to_json(c.trace)},
                        {"metadata", c.metadata},
                        {"anchors", model->anchors.size()}};
    *json_out = copy_string(j.dump());
  });
}

clf_status clf_model_forward(const clf_model* model, const double* input,
                             size_t width, double logits_out[2]) {
  return guarded([&] {
    require(model, "model");
    require(input, "input");
    require(logits_out, "logits_out");
    check_width(model->ckpt.spec, width);
    const auto z = nn::forward(model->ckpt.spec, model->ckpt.params, {input, width});
    logits_out[0] = z[0];
    logits_out[1] = z[1];
  });
}

clf_status clf_model_predict(const clf_model* model, const double* input,
                             size_t width, int* label_out, double* score_out) {
  return guarded([&] {
    require(model, "model");
    require(input, "input");
    check_width(model->ckpt.spec, width);
    const auto p = pipeline::predict(model->ckpt, {input, width});
    if (label_out) *label_out = p.label;
    if (score_out) *score_out = p.score;
  });
}

clf_status clf_model_gradient(const clf_model* model, const double* inputs,
                              const int* labels, size_t count,
                              double* gradient_out, size_t param_count,
                              double* loss_out) {
  return guarded([&] {
    require(model, "model");
    require(gradient_out, "gradient_out");
    if (count == 0) throw BadArgument("gradient needs at least one sample");
    if (param_count != model->ckpt.params.size()) {
      throw BadArgument("gradient buffer size does not match the model");
    }
    const auto& spec = model->ckpt.spec;
    const auto set = make_set(inputs, labels, count, spec.input_width());
    const auto g = nn::backward(
        spec, model->ckpt.params, nn::BatchView::of(set),
        [&](std::size_t i, const nn::Logits& z) {
          return nn::cross_entropy_term(z, set.labels[i]);
        });
    std::memcpy(gradient_out, g.values.data(), param_count * sizeof(double));
    if (loss_out) *loss_out = g.loss;
  });
}

// ---- loss primitives ------------------------------------------------------

clf_status clf_softmax_temp(const double logits[2], double tau,
                            double probs_out[2]) {
  return guarded([&] {
    require(logits, "logits");
    require(probs_out, "probs_out");
    const auto p = nn::softmax_temp({logits[0], logits[1]}, tau);
    probs_out[0] = p[0];
    probs_out[1] = p[1];
  });
}

clf_status clf_kd_loss(const double teacher[2], const double student[2],
                       int label, double alpha, double beta, double tau,
                       double* out) {
  return guarded([&] {
    require(teacher, "teacher");
    require(student, "student");
    require(out, "out");
    continual::KDConfig cfg;
    cfg.alpha = alpha;
    cfg.beta = beta;
    cfg.tau = tau;
    cfg.validate();
    *out = continual::kd_loss({teacher[0], teacher[1]}, {student[0], student[1]},
                              label, cfg);
  });
}

clf_status clf_ewc_penalty(const double* params, const double* anchor,
                           const double* fisher, size_t count, double lambda,
                           double* penalty_out, double* gradient_out) {
  return guarded([&] {
    require(params, "params");
    require(anchor, "anchor");
    require(fisher, "fisher");
    require(penalty_out, "penalty_out");
    const nn::ParamVector theta(std::vector<double>(params, params + count));
    continual::TaskAnchor a;
    a.anchor_params = nn::ParamVector(std::vector<double>(anchor, anchor + count));
    a.fisher_diag.assign(fisher, fisher + count);
    const std::span<const continual::TaskAnchor> anchors(&a, 1);
    *penalty_out = continual::ewc_penalty(theta, anchors, lambda);
    if (gradient_out != nullptr) {
      std::fill(gradient_out, gradient_out + count, 0.0);
      continual::add_ewc_gradient({gradient_out, count}, theta, anchors, lambda);
    }
  });
}

clf_status clf_estimate_fisher(const clf_model* model, const double* inputs,
                               const int* labels, size_t count,
                               int sample_count, uint64_t seed,
                               double* fisher_out, size_t param_count) {
  return guarded([&] {
    require(model, "model");
    require(fisher_out, "fisher_out");
    if (param_count != model->ckpt.params.size()) {
      throw BadArgument("Fisher buffer size does not match the model");
    }
    const auto& spec = model->ckpt.spec;
    const auto set = make_set(inputs, labels, count, spec.input_width());
    continual::EWCConfig cfg;
    cfg.fisher_sample_count = sample_count;
    cfg.validate();
    const auto f = continual::estimate_fisher(spec, model->ckpt.params, set, cfg, seed);
    std::memcpy(fisher_out, f.data(), param_count * sizeof(double));
  });
}

clf_status clf_row_average(const double* percentages, size_t count,
                           double* out) {
  return guarded([&] {
    require(percentages, "percentages");
    require(out, "out");
    *out = harness::row_average({percentages, count});
  });
}

// ---- tasks and manifests --------------------------------------------------

clf_status clf_manifest_preset(const char* preset, uint64_t data_seed,
                               clf_manifest** out) {
  return guarded([&] {
    require(preset, "preset");
    require(out, "out");
    auto m = std::make_unique<clf_manifest>();
    m->manifest = taskgen::make_manifest(taskgen::parse_preset(preset), data_seed);
    *out = m.release();
  });
}

clf_status clf_manifest_from_json(const char* json, clf_manifest** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    auto m = std::make_unique<clf_manifest>();
    const auto j = parse_json(json, "manifest");
    m->manifest = taskgen::manifest_from_json(j);
    *out = m.release();
  });
}

clf_status clf_manifest_load(const char* path, clf_manifest** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto m = std::make_unique<clf_manifest>();
    m->manifest = taskgen::load_manifest(path);
    *out = m.release();
  });
}

clf_status clf_manifest_save(const clf_manifest* manifest, const char* path) {
  return guarded([&] {
    require(manifest, "manifest");
    require(path, "path");
    taskgen::save_manifest(manifest->manifest, path);
  });
}

clf_status clf_manifest_to_json(const clf_manifest* manifest, char** json_out) {
  return guarded([&] {
    require(manifest, "manifest");
    require(json_out, "json_out");
    *json_out = copy_string(taskgen::to_json(manifest->manifest).dump(2));
  });
}

void clf_manifest_destroy(clf_manifest* manifest) { delete manifest; }

clf_status clf_manifest_write_tasks(const clf_manifest* manifest,
                                    const char* dir) {
  return guarded([&] {
    require(manifest, "manifest");
    require(dir, "dir");
    const std::filesystem::path root(dir);
    for (const auto& name : manifest->manifest.sequence.task_names) {
      taskgen::write_directory(manifest->manifest.materialize(name), root / name);
    }
    taskgen::save_manifest(manifest->manifest, root / "manifest.json");
  });
}

clf_status clf_task_from_manifest(const clf_manifest* manifest,
                                  const char* name, clf_task** out) {
  return guarded([&] {
    require(manifest, "manifest");
    require(name, "name");
    require(out, "out");
    auto t = std::make_unique<clf_task>();
    t->task = manifest->manifest.materialize(name);
    *out = t.release();
  });
}

clf_status clf_task_load_directory(const char* dir, clf_task** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    auto t = std::make_unique<clf_task>();
    t->task = taskgen::load_directory(dir);
    *out = t.release();
  });
}

void clf_task_destroy(clf_task* task) { delete task; }

clf_status clf_task_size(const clf_task* task, int split, size_t* out) {
  return guarded([&] {
    require(task, "task");
    require(out, "out");
    *out = split_of(task->task, split).size();
  });
}

clf_status clf_task_sample(const clf_task* task, int split, size_t index,
                           double* patch_out, size_t width, int* label_out) {
  return guarded([&] {
    require(task, "task");
    const auto& set = split_of(task->task, split);
    if (index >= set.size()) throw BadArgument("sample index out of range");
    if (patch_out != nullptr) {
      if (width != set.width) throw BadArgument("patch buffer width mismatch");
      const auto row = set.row(index);
      std::copy(row.begin(), row.end(), patch_out);
    }
    if (label_out) *label_out = set.labels[index];
  });
}

// ---- training and experiments ---------------------------------------------

clf_status clf_train(const clf_model* init, const clf_task* task,
                     const char* strategy_json, const char* run_json,
                     clf_model** out) {
  return guarded([&] {
    require(task, "task");
    require(out, "out");
    const auto strategy = parse_strategy(strategy_json);
    const auto run = parse_run(run_json);
    const auto& data = task->task;

    std::unique_ptr<clf_model> result;
    if (init != nullptr) {
      result = std::make_unique<clf_model>(*init);
    } else {
      const auto spec = nn::default_spec(harness::input_width(run));
      result.reset(new_model(spec, nn::init_params(spec, derive_seed(run.seed, 0x1417)),
                             run.seed));
    }
    auto& ckpt = result->ckpt;
    check_width(ckpt.spec, harness::input_width(run));

    harness::RunConfig stage_run = run;
    stage_run.seed = continual::stage_seed(run.seed, result->stages);
    continual::TrainResult trained;
    if (init == nullptr) {
      trained = continual::train_task(ckpt.spec, ckpt.params, data,
                                      continual::Transfer{}, nullptr, {}, stage_run);
    } else {
      const continual::Teacher teacher{init->ckpt.spec, init->ckpt.params};
      trained = continual::train_task(ckpt.spec, ckpt.params, data, strategy,
                                      &teacher, result->anchors, stage_run);
    }
    ckpt.params = std::move(trained.params);
    ckpt.trace = std::move(trained.trace);
    ckpt.strategy = strategy;
    ckpt.seed = stage_run.seed;
    ckpt.metadata["task"] = data.name;

    if (const auto* ewc = std::get_if<continual::EWCConfig>(&strategy)) {
      continual::TaskAnchor anchor;
      anchor.anchor_params = ckpt.params;
      anchor.fisher_diag = continual::estimate_fisher(
          ckpt.spec, ckpt.params, continual::center_crop(data.train, run.crop),
          *ewc, derive_seed(stage_run.seed, 0xF15E));
      anchor.task_name = data.name;
      continual::accumulate_anchor(result->anchors, std::move(anchor),
                                   ewc->accumulation);
    }
    ++result->stages;
    *out = result.release();
  });
}

clf_status clf_evaluate(const clf_model* model, const clf_task* task,
                        double* accuracy_out) {
  return guarded([&] {
    require(model, "model");
    require(task, "task");
    require(accuracy_out, "accuracy_out");
    harness::CropConfig crop;
    const auto width = model->ckpt.spec.input_width();
    if (width != task->task.test.width) {
      crop.enabled = true;
      crop.size = static_cast<int>(std::lround(std::sqrt(static_cast<double>(width))));
    }
    *accuracy_out =
        harness::evaluate(model->ckpt.spec, model->ckpt.params, task->task, crop);
  });
}

clf_status clf_experiment_run(const clf_manifest* manifest,
                              const char* strategy_json, const char* run_json,
                              const char* options_json, clf_experiment** out) {
  return guarded([&] {
    require(manifest, "manifest");
    require(out, "out");
    const auto strategy = parse_strategy(strategy_json);
    const auto run = parse_run(run_json);
    harness::ExperimentOptions options;
    const auto oj = parse_json(options_json, "options");
    for (const auto& [key, value] : oj.items()) {
      if (key == "group_size") {
        options.group_size = value.get<std::size_t>();
      } else if (key == "group_mode") {
        const auto mode = value.get<std::string>();
        if (mode == "paper_order") {
          options.group_mode = taskgen::GroupMode::paper_order;
        } else if (mode == "greedy") {
          options.group_mode = taskgen::GroupMode::greedy;
        } else {
          throw ConfigError("unknown group mode '" + mode + "'");
        }
      } else {
        throw ConfigError("unknown experiment option '" + key + "'");
      }
    }
    options.spec = nn::default_spec(harness::input_width(run));
    auto e = std::make_unique<clf_experiment>();
    e->spec = options.spec;
    e->result = harness::run_experiment(manifest->manifest, strategy, run, options);
    e->context = {{"manifest", taskgen::to_json(manifest->manifest)},
                  {"run", run},
                  {"strategy", checkpoint::strategy_to_json(strategy)},
                  {"options", oj}};
    *out = e.release();
  });
}

void clf_experiment_destroy(clf_experiment* experiment) { delete experiment; }

clf_status clf_experiment_final_average(const clf_experiment* e, double* out) {
  return guarded([&] {
    require(e, "experiment");
    require(out, "out");
    *out = e->result.final_average;
  });
}

clf_status clf_experiment_to_json(const clf_experiment* e, char** json_out) {
  return guarded([&] {
    require(e, "experiment");
    require(json_out, "json_out");
    auto j = report::summary({e->result});
    j["matrix"] = {{"stages", e->result.matrix.stage_names},
                   {"rows", e->result.matrix.rows}};
    *json_out = copy_string(j.dump());
  });
}

clf_status clf_experiment_final_model(const clf_experiment* e, clf_model** out) {
  return guarded([&] {
    require(e, "experiment");
    require(out, "out");
    if (e->result.checkpoints.empty()) throw UnavailableError("experiment has no stages");
    const auto& last = e->result.checkpoints.back();
    auto m = std::unique_ptr<clf_model>(new_model(e->spec, last.params, 0));
    m->ckpt.trace = last.trace;
    m->ckpt.metadata["stage"] = last.stage_name;
    m->ckpt.metadata["strategy"] = e->result.strategy;
    m->stages = e->result.checkpoints.size();
    *out = m.release();
  });
}

clf_status clf_report_write(const clf_experiment* const* experiments,
                            size_t count, const char* out_dir,
                            const char* context_json) {
  return guarded([&] {
    require(experiments, "experiments");
    require(out_dir, "out_dir");
    if (count == 0) throw BadArgument("report needs at least one experiment");
    std::vector<harness::ExperimentResult> results;
    nlohmann::json runs = nlohmann::json::array();
    for (size_t i = 0; i < count; ++i) {
      require(experiments[i], "experiment");
      if (experiments[i]->result.matrix.task_names !=
          experiments[0]->result.matrix.task_names) {
        throw ConfigError("report runs must share the same tasks");
      }
      results.push_back(experiments[i]->result);
      runs.push_back(experiments[i]->context);
    }
    auto context = parse_json(context_json, "context");
    context["runs"] = runs;
    report::emit_report(results, out_dir, context);
  });
}

clf_status clf_report_regenerate(const char* dir) {
  return guarded([&] {
    require(dir, "dir");
    report::regenerate(dir);
  });
}

clf_status clf_zero_shot(const clf_manifest* manifest, const char* train_task,
                         const char* run_json, char** json_out) {
  return guarded([&] {
    require(manifest, "manifest");
    require(train_task, "train_task");
    require(json_out, "json_out");
    const auto run = parse_run(run_json);
    const auto& m = manifest->manifest;
    m.generator(train_task);
    const auto tasks = m.materialize_all();
    const TaskDataset* first = nullptr;
    for (const auto& t : tasks) {
      if (t.name == train_task) first = &t;
    }
    if (first == nullptr) {
      throw ConfigError(std::string("task '") + train_task +
                        "' is not in the manifest sequence");
    }
    const auto spec = nn::default_spec(harness::input_width(run));
    const auto matrix = harness::zero_shot_eval(spec, run, *first, tasks);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t j = 0; j < tasks.size(); ++j) {
      rows.push_back(
          {{"name", tasks[j].name},
           {"family", taskgen::family_name(m.generator(tasks[j].name).family)},
           {"accuracy", matrix.rows[0][j]}});
    }
    nlohmann::json result = {{"train_task", train_task}, {"tasks", rows}};
    *json_out = copy_string(result.dump());
  });
}

// ---- deployment pipeline --------------------------------------------------

clf_status clf_registry_open(const char* dir, clf_registry** out) {
  return guarded([&] {
    require(out, "out");
    auto r = std::make_unique<clf_registry>();
    if (dir != nullptr) {
      const std::filesystem::path path(dir);
      if (std::filesystem::exists(path / "index.json")) {
        r->registry = pipeline::ModelRegistry::open(path);
      } else {
        r->registry = pipeline::ModelRegistry(path);
      }
    }
    *out = r.release();
  });
}

void clf_registry_destroy(clf_registry* registry) { delete registry; }

clf_status clf_registry_register(clf_registry* registry, const clf_model* model,
                                 const char* metadata_json,
                                 uint64_t* version_out) {
  return guarded([&] {
    require(registry, "registry");
    require(model, "model");
    require(version_out, "version_out");
    const auto j = parse_json(metadata_json, "metadata");
    pipeline::VersionMetadata meta;
    meta.strategy = checkpoint::strategy_to_json(model->ckpt.strategy).at("name");
    for (const auto& [key, value] : j.items()) {
      if (key == "strategy") {
        meta.strategy = value.get<std::string>();
      } else if (key == "trained_on") {
        meta.trained_on = value.get<std::vector<std::string>>();
      } else if (key == "parent_version") {
        meta.parent_version = value.get<std::uint64_t>();
      } else if (key == "timestamp") {
        meta.timestamp = value.get<std::string>();
      } else {
        throw ConfigError("unknown registry metadata key '" + key + "'");
      }
    }
    *version_out = registry->registry.register_checkpoint(model->ckpt, meta);
  });
}

clf_status clf_registry_activate(clf_registry* registry, uint64_t version) {
  return guarded([&] {
    require(registry, "registry");
    registry->registry.activate(version);
  });
}

clf_status clf_registry_active_version(const clf_registry* registry,
                                       uint64_t* out) {
  return guarded([&] {
    require(registry, "registry");
    require(out, "out");
    *out = registry->registry.active_version();
  });
}

clf_status clf_registry_get(const clf_registry* registry, uint64_t version,
                            clf_model** out) {
  return guarded([&] {
    require(registry, "registry");
    require(out, "out");
    const auto entry = registry->registry.entry(version);
    auto m = std::make_unique<clf_model>();
    m->ckpt = *entry.checkpoint;
    *out = m.release();
  });
}

clf_status clf_registry_list(const clf_registry* registry, char** json_out) {
  return guarded([&] {
    require(registry, "registry");
    require(json_out, "json_out");
    nlohmann::json versions = nlohmann::json::array();
    for (const auto& e : registry->registry.entries()) {
      versions.push_back({{"version", e.version},
                          {"strategy", e.metadata.strategy},
                          {"trained_on", e.metadata.trained_on},
                          {"parent_version", e.metadata.parent_version},
                          {"timestamp", e.metadata.timestamp},
                          {"checksum", e.checksum}});
    }
    nlohmann::json j = {{"active", registry->registry.active_version()},
                        {"versions", versions}};
    *json_out = copy_string(j.dump());
  });
}

clf_status clf_registry_predict(const clf_registry* registry,
                                const double* patch, size_t width,
                                int* label_out, double* score_out) {
  return guarded([&] {
    require(registry, "registry");
    require(patch, "patch");
    const auto model = registry->registry.active();
    if (!model) throw UnavailableError("no active model");
    check_width(model->spec, width);
    const auto p = pipeline::predict(*model, {patch, width});
    if (label_out) *label_out = p.label;
    if (score_out) *score_out = p.score;
  });
}

clf_status clf_scenario_run(const clf_manifest* manifest,
                            const char* scenario_json, const char* config_json,
                            clf_registry* registry, uint64_t seed,
                            const char* log_path, char** json_out) {
  return guarded([&] {
    require(manifest, "manifest");
    require(scenario_json, "scenario_json");
    require(registry, "registry");
    require(json_out, "json_out");
    nlohmann::json sj;
    try {
      sj = nlohmann::json::parse(scenario_json);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
    }
    const auto script = pipeline::parse_scenario(sj);
    const auto config = config_json == nullptr
                            ? pipeline::PipelineConfig{}
                            : pipeline::pipeline_config_from_json(
                                  parse_json(config_json, "pipeline config"));

    std::ofstream log;
    if (log_path != nullptr) {
      log.open(log_path, std::ios::binary | std::ios::trunc);
      if (!log) throw IoError(std::string("cannot write log ") + log_path);
    }
    pipeline::EventSink sink = nullptr;
    if (log.is_open()) {
      sink = [&log](const nlohmann::json& event) { log << event.dump() << '\n'; };
    }
    const auto result = pipeline::run_scenario(script, manifest->manifest, config,
                                               registry->registry, seed, sink);
    if (log.is_open()) {
      log.flush();
      if (!log) throw IoError(std::string("failed writing log ") + log_path);
    }

    nlohmann::json phases = nlohmann::json::array();
    for (const auto& p : result.phases) {
      phases.push_back({{"generator", p.generator_name},
                        {"before", p.before},
                        {"after", p.after}});
    }
    nlohmann::json retrains = nlohmann::json::array();
    for (const auto& r : result.retrains) {
      retrains.push_back({{"window_id", r.window_id},
                          {"parent_version", r.parent_version},
                          {"new_version", r.new_version},
                          {"activated", r.activated},
                          {"best_epoch", r.trace.best_epoch}});
    }
    nlohmann::json j = {{"phases", phases},
                        {"retrains", retrains},
                        {"final_version", result.final_version},
                        {"config", pipeline::to_json(config)},
                        {"event_count", result.events.size()}};
    *json_out = copy_string(j.dump());
  });
}

}  // extern "C"
