/* Copyright 2026 The RIGL Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the RIGL library.
 *
 * Every function returns a rigl_status. On failure the thread-local message
 * from rigl_last_error() describes the cause. Strings returned inside result
 * structs are owned by the library and stay valid until the next call on the
 * same thread.
 */

#ifndef RIGL_RIGL_H_
#define RIGL_RIGL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RIGL_API __declspec(dllexport)
#else
#define RIGL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rigl_status {
  RIGL_OK = 0,
  RIGL_ERR_INVALID_ARGUMENT = 1,
  RIGL_ERR_IO = 2,
  RIGL_ERR_CONFIG = 3,
  RIGL_ERR_LOOKUP = 4,
  RIGL_ERR_NUMERIC = 5,
  RIGL_ERR_STATE = 6,
  RIGL_ERR_INTERNAL = 7
} rigl_status;

typedef struct rigl_config rigl_config;

RIGL_API const char* rigl_version(void);
RIGL_API const char* rigl_status_string(rigl_status status);
/* Message of the last failed call on this thread; "" if none. */
RIGL_API const char* rigl_last_error(void);
/* Non-zero suppresses info-level log lines on stderr. */
RIGL_API void rigl_set_log_quiet(int quiet);

/* Relative paths inside the file resolve against its directory. */
RIGL_API rigl_status rigl_config_load(const char* path, rigl_config** out);
/* base_dir may be NULL (current directory). */
RIGL_API rigl_status rigl_config_parse(const char* json, const char* base_dir, rigl_config** out);
/* Dotted key, e.g. "agent.lr". The value is parsed as JSON, else taken as a string. */
RIGL_API rigl_status rigl_config_set(rigl_config* config, const char* key, const char* value);
RIGL_API rigl_status rigl_config_validate(const rigl_config* config);
/* 16 hex digits plus the terminator; len must be at least 17. */
RIGL_API rigl_status rigl_config_fingerprint(const rigl_config* config, char* buf, size_t len);
/* Writes the effective config as JSON. *needed receives the size including
 * the terminator; buf may be NULL to query it. */
RIGL_API rigl_status rigl_config_dump(const rigl_config* config, char* buf, size_t len,
                                      size_t* needed);
RIGL_API void rigl_config_free(rigl_config* config);

typedef struct rigl_build_info {
  int cache_hit;
  const char* path;
  size_t events;
  size_t users;
  size_t pois;
  size_t categories;
  size_t zones;
  size_t windows;
} rigl_build_info;

RIGL_API rigl_status rigl_build(const rigl_config* config, rigl_build_info* out);

typedef struct rigl_calibration {
  double d;
  double c;
  double p;
  size_t samples;
  size_t rounds;
} rigl_calibration;

RIGL_API rigl_status rigl_calibrate(const rigl_config* config, rigl_calibration* out);

typedef struct rigl_train_options {
  const char* resume_path; /* NULL or "": start fresh */
  int64_t stop_after;      /* episodes to run in this call; < 0 runs to the end */
} rigl_train_options;

typedef struct rigl_train_result {
  const char* checkpoint_path;
  const char* log_path;
  size_t episodes_done;
  size_t episodes_total;
  int finished;
} rigl_train_result;

/* options may be NULL. */
RIGL_API rigl_status rigl_train(const rigl_config* config, const rigl_train_options* options,
                                rigl_train_result* out);

typedef struct rigl_eval_options {
  const char* checkpoint_path; /* NULL or "": <output_dir>/checkpoint.bin */
  int oracle;                  /* predict the true POI; no checkpoint needed */
} rigl_eval_options;

typedef struct rigl_eval_report {
  double prec_cat;
  double rec_cat;
  double avg_sim;
  double avg_dist_km;
  double accuracy;
  size_t predictions;
  size_t skipped_users;
  size_t skipped_events;
  const char* fingerprint;
} rigl_eval_report;

RIGL_API rigl_status rigl_eval(const rigl_config* config, const rigl_eval_options* options,
                               rigl_eval_report* out);

typedef struct rigl_sweep_result {
  const char* table_path;
  size_t points;
  size_t rows;
} rigl_sweep_result;

/* Each axis is "key=v1,v2,..." or "key=[json, values]". */
RIGL_API rigl_status rigl_sweep(const rigl_config* config, const char* const* axes,
                                size_t num_axes, rigl_sweep_result* out);

#ifdef __cplusplus
}
#endif

#endif /* RIGL_RIGL_H_ */
