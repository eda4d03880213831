// Copyright 2026 The silofl Authors. All Rights Reserved.
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
// =============================================================================

/* C interface to the silofl core: image hashing, corpus deduplication and
 * federated-learning experiments. Objects are opaque handles; every call that
 * can fail returns an sfl_status and leaves a message for sfl_last_error(). */

#ifndef SILOFL_SILOFL_H_
#define SILOFL_SILOFL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(SILOFL_BUILDING)
#define SILOFL_API __attribute__((visibility("default")))
#else
#define SILOFL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sfl_status {
  SFL_OK = 0,
  SFL_ERR_INVALID_ARGUMENT = 1,
  SFL_ERR_IO = 2,
  SFL_ERR_PARSE = 3,
  SFL_ERR_CONFIG = 4,
  SFL_ERR_RUNTIME = 5,
  SFL_ERR_INTERNAL = 6
} sfl_status;

/* Message of the last failed call on this thread ("" if none). */
SILOFL_API const char* sfl_last_error(void);
SILOFL_API const char* sfl_status_name(sfl_status status);
/* Process exit code for a status: 0 success, 2 usage/config/input, 3 runtime. */
SILOFL_API int sfl_exit_code(sfl_status status);
SILOFL_API const char* sfl_version(void);

/* ---- Perceptual hashing ------------------------------------------------- */

#define SFL_HASH_HEX_LEN 64

typedef struct sfl_hashes {
  char ahash[SFL_HASH_HEX_LEN + 1];
  char phash[SFL_HASH_HEX_LEN + 1];
} sfl_hashes;

/* rgb: width * height interleaved 8-bit RGB triples. */
SILOFL_API sfl_status sfl_hash_rgb(const uint8_t* rgb, int width, int height, sfl_hashes* out);
/* PNG or JPEG. width/height may be NULL. */
SILOFL_API sfl_status sfl_hash_file(const char* path, sfl_hashes* out, int* width, int* height);
SILOFL_API sfl_status sfl_hamming_hex(const char* a, const char* b, int* distance);

/* ---- Corpus deduplication ------------------------------------------------ */

typedef struct sfl_dedup sfl_dedup;

typedef struct sfl_curation_report {
  long long total_raw;
  long long duplicates_removed;
  double reduction_pct;
  long long conflict_groups;
  long long unique_remaining;
} sfl_curation_report;

SILOFL_API sfl_status sfl_dedup_create(sfl_dedup** out);
SILOFL_API void sfl_dedup_destroy(sfl_dedup* dedup);
SILOFL_API sfl_status sfl_dedup_add_root(sfl_dedup* dedup, const char* dir, const char* source);
SILOFL_API sfl_status sfl_dedup_add_coco(sfl_dedup* dedup, const char* manifest,
                                         const char* images_root, const char* source);
/* Replaces the default label set (Healthy, Coccidiosis, NCD, Salmonella). */
SILOFL_API sfl_status sfl_dedup_set_labels(sfl_dedup* dedup, const char* const* labels, size_t count);
/* Maps a directory or COCO category name onto a label. */
SILOFL_API sfl_status sfl_dedup_map_label(sfl_dedup* dedup, const char* name, const char* label);
SILOFL_API sfl_status sfl_dedup_set_threshold(sfl_dedup* dedup, int threshold);
SILOFL_API sfl_status sfl_dedup_set_threads(sfl_dedup* dedup, int threads);
SILOFL_API sfl_status sfl_dedup_set_output(sfl_dedup* dedup, const char* dir);
SILOFL_API sfl_status sfl_dedup_run(sfl_dedup* dedup, sfl_curation_report* report);
/* Valid after a successful sfl_dedup_run, until the next run or destroy. */
SILOFL_API const char* sfl_dedup_report_text(const sfl_dedup* dedup);
SILOFL_API size_t sfl_dedup_warning_count(const sfl_dedup* dedup);
SILOFL_API const char* sfl_dedup_warning(const sfl_dedup* dedup, size_t index);
SILOFL_API size_t sfl_dedup_group_count(const sfl_dedup* dedup);

/* ---- Experiments --------------------------------------------------------- */

typedef struct sfl_experiment sfl_experiment;

typedef enum sfl_paradigm {
  SFL_PARADIGM_CENTRALIZED = 0,
  SFL_PARADIGM_ISOLATED = 1,
  SFL_PARADIGM_FEDERATED = 2
} sfl_paradigm;

typedef struct sfl_run_summary {
  uint64_t seed;
  double final_accuracy; /* centralized / federated */
  double final_loss;
  double mean_accuracy; /* isolated */
  double std_accuracy;
} sfl_run_summary;

typedef struct sfl_ablation_row {
  int rounds;
  uint64_t seed;
  double final_accuracy;
  double final_loss;
} sfl_ablation_row;

SILOFL_API sfl_status sfl_paradigm_parse(const char* name, sfl_paradigm* out);

SILOFL_API sfl_status sfl_experiment_load(const char* config_path, sfl_experiment** out);
/* Config from an in-memory document; relative paths resolve against the cwd. */
SILOFL_API sfl_status sfl_experiment_parse(const char* config_text, sfl_experiment** out);
SILOFL_API void sfl_experiment_destroy(sfl_experiment* exp);
SILOFL_API sfl_status sfl_experiment_set_output(sfl_experiment* exp, const char* dir);
SILOFL_API sfl_status sfl_experiment_set_threads(sfl_experiment* exp, int threads);
/* Repeat every command over these seeds and add a seed column. count 0 clears. */
SILOFL_API sfl_status sfl_experiment_set_seeds(sfl_experiment* exp, const uint64_t* seeds, size_t count);
/* Resolved configuration as JSON; owned by the handle. */
SILOFL_API const char* sfl_experiment_config_json(const sfl_experiment* exp);

SILOFL_API sfl_status sfl_experiment_run(sfl_experiment* exp, sfl_paradigm paradigm);
SILOFL_API sfl_status sfl_experiment_ablate_rounds(sfl_experiment* exp, const int* rounds, size_t count);
SILOFL_API sfl_status sfl_experiment_partition(sfl_experiment* exp);

/* Results of the last run/ablation on this handle. */
SILOFL_API const char* sfl_experiment_metrics_path(const sfl_experiment* exp);
SILOFL_API size_t sfl_experiment_summary_count(const sfl_experiment* exp);
SILOFL_API sfl_status sfl_experiment_summary(const sfl_experiment* exp, size_t index, sfl_run_summary* out);
SILOFL_API size_t sfl_experiment_ablation_count(const sfl_experiment* exp);
SILOFL_API sfl_status sfl_experiment_ablation_row(const sfl_experiment* exp, size_t index,
                                                  sfl_ablation_row* out);

#ifdef __cplusplus
}
#endif

#endif /* SILOFL_SILOFL_H_ */
