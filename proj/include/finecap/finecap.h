// Copyright 2026 The finecap Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to the finecap annotation pipeline. All functions are
 * thread-compatible: one context must not be used from two threads at once.
 * Strings returned by the library stay valid until the next call on the same
 * context (or, for NULL contexts, the next call on the same thread). */
#ifndef FINECAP_FINECAP_H_
#define FINECAP_FINECAP_H_

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(FC_BUILDING_LIBRARY)
#define FC_API __attribute__((visibility("default")))
#else
#define FC_API
#endif

typedef enum fc_status {
  FC_OK = 0,
  FC_PARTIAL = 1, /* stage finished but some moments failed */
  FC_ERR_CONFIG = 2,
  FC_ERR_IO = 3,
  FC_ERR_INVALID_ARGUMENT = 4,
  FC_ERR_BACKEND = 5,
  FC_ERR_NUMERIC = 6,
  FC_ERR_INTERNAL = 7
} fc_status;

typedef struct fc_context fc_context;
typedef struct fc_model fc_model;

FC_API const char* fc_version(void);
FC_API const char* fc_status_name(fc_status status);

/* Process exit code for a status: 0 ok, 1 partial, 2 anything else. */
FC_API int fc_exit_code(fc_status status);

/* config_path may be NULL for built-in defaults. On failure *out is NULL and
 * fc_last_error(NULL) describes the problem. */
FC_API fc_status fc_context_create(const char* config_path, fc_context** out);
FC_API void fc_context_destroy(fc_context* ctx);

/* Message of the last failed call on ctx, or of the last failed
 * context-free call on this thread when ctx is NULL. Never NULL. */
FC_API const char* fc_last_error(const fc_context* ctx);

/* Run options: work_dir, moments, stats_input, lexicon, predictions,
 * ground_truth, force (0/1), log_level (debug|info|warn|error|off).
 * Keys prefixed "config." override a config entry by dotted path, e.g.
 * "config.workers" = "8"; the config is re-validated immediately. */
FC_API fc_status fc_context_set_option(fc_context* ctx, const char* key, const char* value);

/* Runs one stage by name ("keyframes" ... "eval-metrics") or "run-all". */
FC_API fc_status fc_run_stage(fc_context* ctx, const char* stage);

/* Per-moment failures and manifest status of the last fc_run_stage call. */
FC_API size_t fc_last_failure_count(const fc_context* ctx);
FC_API int fc_last_manifest_match(const fc_context* ctx);

/* Copies the normalized config JSON (NUL-terminated) into buf when it fits.
 * *needed receives the required size including the terminator. Returns
 * FC_ERR_INVALID_ARGUMENT when cap is too small. */
FC_API fc_status fc_normalized_config_json(fc_context* ctx, char* buf, size_t cap, size_t* needed);

/* Decodes video_path into <frames_dir>/<video_id>/<ms>.png at fps using the
 * config's decoder binary. *count receives the number of frames written. */
FC_API fc_status fc_extract_frames(fc_context* ctx, const char* video_path, const char* video_id,
                                   double fps, size_t* count);

FC_API fc_status fc_t_iou(double a_start, double a_end, double b_start, double b_end, double* out);

/* task: "vcmr", "svmr" or "vr". */
FC_API fc_status fc_recall_at(const char* predictions_path, const char* ground_truth_path,
                              const char* task, double m, int k, double* out);

FC_API fc_status fc_model_load(const char* checkpoint_path, fc_model** out);
FC_API void fc_model_destroy(fc_model* model);
FC_API fc_status fc_model_dims(const fc_model* model, size_t* base_dim, size_t* proj_dim);
/* frames: n_frames row vectors of length dim, row-major. */
FC_API fc_status fc_model_score(const fc_model* model, const double* frames, size_t n_frames,
                                const double* caption, size_t dim, double* out);

#ifdef __cplusplus
}
#endif

#endif /* FINECAP_FINECAP_H_ */
