/* Copyright (c) 2026 The clfake Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface of the clfake continual-learning engine.
 *
 * Every function returns a clf_status. On failure, clf_last_error() returns
 * a message describing the last error raised on the calling thread. Objects
 * are opaque handles released with their *_destroy function; strings
 * returned through char** out-parameters are heap copies released with
 * clf_string_free. Structured inputs and outputs (run configs, strategies,
 * results) are JSON text.
 */
#ifndef CLFAKE_CLFAKE_H
#define CLFAKE_CLFAKE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(CLFAKE_BUILDING_LIBRARY)
#define CLF_API __declspec(dllexport)
#else
#define CLF_API __declspec(dllimport)
#endif
#else
#define CLF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum clf_status {
  CLF_OK = 0,
  CLF_ERR_INVALID_ARGUMENT = 1, /* null handle, bad buffer size, bad JSON */
  CLF_ERR_CONFIG = 2,
  CLF_ERR_DOMAIN = 3,
  CLF_ERR_NUMERIC = 4,
  CLF_ERR_IO = 5,
  CLF_ERR_INGESTION = 6,
  CLF_ERR_NOT_FOUND = 7,
  CLF_ERR_UNAVAILABLE = 8,
  CLF_ERR_VALIDATION = 9,
  CLF_ERR_INSUFFICIENT_DATA = 10,
  CLF_ERR_INTERNAL = 11
} clf_status;

CLF_API const char* clf_version(void);
CLF_API const char* clf_status_name(clf_status status);
CLF_API const char* clf_last_error(void);
CLF_API void clf_string_free(char* s);

/* ---- models ------------------------------------------------------------ */

typedef struct clf_model clf_model;

/* He-uniform initialised MLP. widths: input width first, 2 last. */
CLF_API clf_status clf_model_create(const size_t* widths, size_t count,
                                    uint64_t seed, clf_model** out);
/* The default detector, widths [1024, 64, 32, 2]. */
CLF_API clf_status clf_model_create_default(uint64_t seed, clf_model** out);
CLF_API clf_status clf_model_clone(const clf_model* model, clf_model** out);
CLF_API void clf_model_destroy(clf_model* model);

CLF_API clf_status clf_model_save(const clf_model* model, const char* path);
CLF_API clf_status clf_model_load(const char* path, clf_model** out);

CLF_API clf_status clf_model_input_width(const clf_model* model, size_t* out);
CLF_API clf_status clf_model_param_count(const clf_model* model, size_t* out);
CLF_API clf_status clf_model_get_params(const clf_model* model, double* out,
                                        size_t count);
CLF_API clf_status clf_model_set_params(clf_model* model, const double* values,
                                        size_t count);
/* FNV-1a over the parameter bytes. */
CLF_API clf_status clf_model_checksum(const clf_model* model, uint64_t* out);
/* Spec, strategy, seed and training trace as JSON. */
CLF_API clf_status clf_model_info(const clf_model* model, char** json_out);

CLF_API clf_status clf_model_forward(const clf_model* model,
                                     const double* input, size_t width,
                                     double logits_out[2]);
/* Label (0 real, 1 fake) and P(fake). */
CLF_API clf_status clf_model_predict(const clf_model* model,
                                     const double* input, size_t width,
                                     int* label_out, double* score_out);
/* Gradient of the mean cross-entropy over `count` row-major samples. */
CLF_API clf_status clf_model_gradient(const clf_model* model,
                                      const double* inputs, const int* labels,
                                      size_t count, double* gradient_out,
                                      size_t param_count, double* loss_out);

/* ---- loss primitives --------------------------------------------------- */

CLF_API clf_status clf_softmax_temp(const double logits[2], double tau,
                                    double probs_out[2]);
CLF_API clf_status clf_kd_loss(const double teacher[2], const double student[2],
                               int label, double alpha, double beta, double tau,
                               double* out);
/* Single-anchor penalty sum_i (lambda/2) F_i (theta_i - anchor_i)^2 and its
 * gradient (gradient_out may be null). */
CLF_API clf_status clf_ewc_penalty(const double* params, const double* anchor,
                                   const double* fisher, size_t count,
                                   double lambda, double* penalty_out,
                                   double* gradient_out);
/* Empirical diagonal Fisher of `model` over min(sample_count, count)
 * samples. */
CLF_API clf_status clf_estimate_fisher(const clf_model* model,
                                       const double* inputs, const int* labels,
                                       size_t count, int sample_count,
                                       uint64_t seed, double* fisher_out,
                                       size_t param_count);
/* Mean of percentages, each rounded half away from zero to 2 decimals. */
CLF_API clf_status clf_row_average(const double* percentages, size_t count,
                                   double* out);

/* ---- tasks and manifests ----------------------------------------------- */

typedef struct clf_manifest clf_manifest;
typedef struct clf_task clf_task;

/* preset: "easy_like" or "long_like". */
CLF_API clf_status clf_manifest_preset(const char* preset, uint64_t data_seed,
                                       clf_manifest** out);
CLF_API clf_status clf_manifest_from_json(const char* json, clf_manifest** out);
CLF_API clf_status clf_manifest_load(const char* path, clf_manifest** out);
CLF_API clf_status clf_manifest_save(const clf_manifest* manifest,
                                     const char* path);
CLF_API clf_status clf_manifest_to_json(const clf_manifest* manifest,
                                        char** json_out);
CLF_API void clf_manifest_destroy(clf_manifest* manifest);
/* Writes <dir>/<task>/{train,val,test}/{real,fake}/NNNNN.pgm for every task
 * in the sequence plus <dir>/manifest.json. */
CLF_API clf_status clf_manifest_write_tasks(const clf_manifest* manifest,
                                            const char* dir);

CLF_API clf_status clf_task_from_manifest(const clf_manifest* manifest,
                                          const char* name, clf_task** out);
/* Ingests a <dir>/{train,val,test}/{real,fake}/ tree of 8-bit PGM files. */
CLF_API clf_status clf_task_load_directory(const char* dir, clf_task** out);
CLF_API void clf_task_destroy(clf_task* task);
/* split: 0 train, 1 val, 2 test. */
CLF_API clf_status clf_task_size(const clf_task* task, int split, size_t* out);
CLF_API clf_status clf_task_sample(const clf_task* task, int split,
                                   size_t index, double* patch_out,
                                   size_t width, int* label_out);

/* ---- training and experiments ------------------------------------------ */

/* Trains `task` starting from `init` (or a fresh default model seeded from
 * the run seed when init is null). strategy_json: {"name": "transfer"|"kd"|
 * "ewc", ...}; a KD run distils from `init`. run_json may be null for the
 * defaults. */
CLF_API clf_status clf_train(const clf_model* init, const clf_task* task,
                             const char* strategy_json, const char* run_json,
                             clf_model** out);
/* Test-split accuracy. */
CLF_API clf_status clf_evaluate(const clf_model* model, const clf_task* task,
                                double* accuracy_out);

typedef struct clf_experiment clf_experiment;

/* Continual run over the manifest sequence. options_json (may be null):
 * {"group_size": n, "group_mode": "paper_order"|"greedy"}. */
CLF_API clf_status clf_experiment_run(const clf_manifest* manifest,
                                      const char* strategy_json,
                                      const char* run_json,
                                      const char* options_json,
                                      clf_experiment** out);
CLF_API void clf_experiment_destroy(clf_experiment* experiment);
CLF_API clf_status clf_experiment_final_average(const clf_experiment* e,
                                                double* out);
/* Eval matrix, curve, forgetting and best epochs as JSON. */
CLF_API clf_status clf_experiment_to_json(const clf_experiment* e,
                                          char** json_out);
/* Model after the last stage. */
CLF_API clf_status clf_experiment_final_model(const clf_experiment* e,
                                              clf_model** out);
/* eval_matrix.csv, curves.csv, curves.svg, table.md and summary.json for
 * runs over the same tasks. context_json may be null. */
CLF_API clf_status clf_report_write(const clf_experiment* const* experiments,
                                    size_t count, const char* out_dir,
                                    const char* context_json);
/* Rebuilds curves.svg and table.md from the CSVs in dir. */
CLF_API clf_status clf_report_regenerate(const char* dir);

/* Trains a fresh model on `train_task` and scores every manifest task.
 * Result: {"train_task", "tasks": [{"name", "family", "accuracy"}...]}. */
CLF_API clf_status clf_zero_shot(const clf_manifest* manifest,
                                 const char* train_task, const char* run_json,
                                 char** json_out);

/* ---- deployment pipeline ----------------------------------------------- */

typedef struct clf_registry clf_registry;

/* dir may be null for an in-memory registry; an existing registry
 * directory is reopened and verified. */
CLF_API clf_status clf_registry_open(const char* dir, clf_registry** out);
CLF_API void clf_registry_destroy(clf_registry* registry);
CLF_API clf_status clf_registry_register(clf_registry* registry,
                                         const clf_model* model,
                                         const char* metadata_json,
                                         uint64_t* version_out);
CLF_API clf_status clf_registry_activate(clf_registry* registry,
                                         uint64_t version);
CLF_API clf_status clf_registry_active_version(const clf_registry* registry,
                                               uint64_t* out);
CLF_API clf_status clf_registry_get(const clf_registry* registry,
                                    uint64_t version, clf_model** out);
/* Versions with metadata and checksums as JSON. */
CLF_API clf_status clf_registry_list(const clf_registry* registry,
                                     char** json_out);
CLF_API clf_status clf_registry_predict(const clf_registry* registry,
                                        const double* patch, size_t width,
                                        int* label_out, double* score_out);

/* Runs a scenario script (JSON list of {generator_name, count,
 * label_available}) against the registry. config_json (may be null):
 * {"strategy": {...}, "run": {...}, "drift_threshold", "window_size",
 * "approval_mode", "pending_only", "train_fraction"}. Events are appended to
 * log_path as JSON lines when it is non-null. */
CLF_API clf_status clf_scenario_run(const clf_manifest* manifest,
                                    const char* scenario_json,
                                    const char* config_json,
                                    clf_registry* registry, uint64_t seed,
                                    const char* log_path, char** json_out);

#ifdef __cplusplus
}
#endif

#endif /* CLFAKE_CLFAKE_H */
