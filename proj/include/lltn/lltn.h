/* Copyright 2026 The LLTN Authors
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

/* C interface of the listener-motion library.
 *
 * Every call returns an lltn_status; on failure lltn_last_error() describes
 * the problem (per thread, valid until the next failing call). Objects are
 * opaque handles released with their *_free function. Strings returned
 * through char** are heap allocated and released with lltn_string_free.
 * Configurations are JSON strings in the run-config layout produced by
 * lltn_config_resolve. */

#ifndef LLTN_LLTN_H_
#define LLTN_LLTN_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LLTN_API __declspec(dllexport)
#else
#define LLTN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lltn_status {
  LLTN_OK = 0,
  LLTN_ERR_INVALID_ARGUMENT = 1,
  LLTN_ERR_PARSE = 2,
  LLTN_ERR_INVARIANT = 3,
  LLTN_ERR_SHAPE = 4,
  LLTN_ERR_NUMERIC = 5,
  LLTN_ERR_IO = 6,
  LLTN_ERR_INTERNAL = 7
} lltn_status;

typedef struct lltn_dataset lltn_dataset;
typedef struct lltn_vq lltn_vq;
typedef struct lltn_lm lltn_lm;

/* Receives one JSON object per training step. */
typedef void (*lltn_log_fn)(const char* json_line, void* user);

LLTN_API const char* lltn_version(void);
LLTN_API const char* lltn_last_error(void);
LLTN_API const char* lltn_status_name(lltn_status status);
LLTN_API void lltn_string_free(char* s);
LLTN_API void lltn_set_threads(int n);

/* Defaults, then the JSON file at config_path (may be NULL), then
 * "dotted.key=value" overrides. Unknown keys are errors. */
LLTN_API lltn_status lltn_config_resolve(const char* config_path, const char* const* overrides, size_t n_overrides,
                                         char** out_json);

/* Datasets (dyad-v1 JSONL). */
LLTN_API lltn_status lltn_dataset_load(const char* path, lltn_dataset** out);
LLTN_API lltn_status lltn_dataset_save(const lltn_dataset* ds, const char* path);
LLTN_API lltn_status lltn_dataset_size(const lltn_dataset* ds, size_t* out);
LLTN_API void lltn_dataset_free(lltn_dataset* ds);

/* Synthetic corpus from the "synth" section; the affect model is returned as
 * JSON. */
LLTN_API lltn_status lltn_synth_generate(const char* config_json, lltn_dataset** train, lltn_dataset** val,
                                         lltn_dataset** test, char** affect_json);

/* Motion VQ-VAE. */
LLTN_API lltn_status lltn_vq_train(const char* config_json, const lltn_dataset* train, lltn_log_fn log, void* user,
                                   lltn_vq** out);
LLTN_API lltn_status lltn_vq_load(const char* path, lltn_vq** out);
LLTN_API lltn_status lltn_vq_save(const lltn_vq* vq, const char* path);
LLTN_API lltn_status lltn_vq_info(const lltn_vq* vq, const lltn_dataset* ds, char** out_json);
/* Tokenize + decode of every listener. */
LLTN_API lltn_status lltn_vq_reconstruct(const lltn_vq* vq, const lltn_dataset* ds, lltn_dataset** out);
LLTN_API void lltn_vq_free(lltn_vq* vq);

/* Listener language model. ablation is one of "full", "nopt", "unaligned",
 * "scrambled", "fixtok", "fixtok-punc", "uncond". init may be NULL or a
 * text-pretrained model. */
LLTN_API lltn_status lltn_lm_pretrain(const char* config_json, const lltn_dataset* train, int codebook_size,
                                      lltn_log_fn log, void* user, lltn_lm** out);
LLTN_API lltn_status lltn_lm_train(const char* config_json, const lltn_dataset* train, const lltn_vq* vq,
                                   const char* ablation, const lltn_lm* init, lltn_log_fn log, void* user,
                                   lltn_lm** out);
LLTN_API lltn_status lltn_lm_load(const char* path, lltn_lm** out);
LLTN_API lltn_status lltn_lm_save(const lltn_lm* lm, const char* path);
LLTN_API lltn_status lltn_lm_info(const lltn_lm* lm, char** out_json);
LLTN_API lltn_status lltn_lm_generate(const lltn_lm* lm, const lltn_vq* vq, const lltn_dataset* segments,
                                      uint64_t seed, lltn_dataset** predictions);
LLTN_API lltn_status lltn_lm_dump_streams(const lltn_lm* lm, const lltn_vq* vq, const lltn_dataset* segments,
                                          uint64_t seed, char** out_json);
LLTN_API void lltn_lm_free(lltn_lm* lm);

/* Metrics of predictions against ground truth, matched by segment id. vq may
 * be NULL (the Shannon index is then omitted). */
LLTN_API lltn_status lltn_evaluate(const char* config_json, const lltn_dataset* predictions,
                                   const lltn_dataset* ground_truth, const char* affect_json, const lltn_vq* vq,
                                   char** report_json);
/* rows_json: [{"name": ..., "report": {...}}, ...] */
LLTN_API lltn_status lltn_format_table(const char* rows_json, char** out_text);

/* Baselines: "random-train", "random-vq" (needs vq), "mean", "nn". For "nn"
 * the index is also written to index_path when it is not NULL. */
LLTN_API lltn_status lltn_baseline_predict(const char* config_json, const char* name, const lltn_dataset* train,
                                           const lltn_vq* vq, const lltn_dataset* segments, const char* index_path,
                                           lltn_dataset** predictions);

/* Analyses. */
LLTN_API lltn_status lltn_analyze_punctuation(const char* config_json, const lltn_dataset* ds, const lltn_vq* vq,
                                              char** out_csv);
LLTN_API lltn_status lltn_analyze_affect_hist(const char* config_json, const lltn_dataset* ds,
                                              const char* affect_json, int k, char** out_csv);
LLTN_API lltn_status lltn_analyze_history_sweep(const char* config_json, const double* history_seconds, size_t n,
                                                const lltn_vq* vq, lltn_log_fn log, void* user, char** out_json);

#ifdef __cplusplus
}
#endif

#endif /* LLTN_LLTN_H_ */
