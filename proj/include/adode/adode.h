/* Copyright 2026 The adode Authors
 * SPDX-License-Identifier: Apache-2.0 */

/* C interface to the adode library. All functions are thread-safe with
 * respect to distinct handles. Strings returned through `char**` must be
 * released with adode_string_free. */

#ifndef ADODE_ADODE_H_
#define ADODE_ADODE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(ADODE_BUILDING_LIBRARY)
#define ADODE_API __attribute__((visibility("default")))
#else
#define ADODE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum adode_status {
  ADODE_OK = 0,
  ADODE_USAGE = 1,     /* bad configuration or arguments */
  ADODE_DATA = 2,      /* malformed or missing input data */
  ADODE_NUMERICAL = 3  /* solver or training failure */
} adode_status;

typedef struct adode_checkpoint adode_checkpoint;
typedef struct adode_features adode_features;

ADODE_API const char* adode_version(void);

/* Message of the last failure on the calling thread, "" if none. */
ADODE_API const char* adode_last_error(void);

ADODE_API void adode_string_free(char* s);

/* Default configuration as a JSON document. */
ADODE_API adode_status adode_default_config(char** out_json);

/* Merges defaults <- file_json <- overrides_json; either input may be NULL. */
ADODE_API adode_status adode_resolve_config(const char* file_json, const char* overrides_json,
                                            char** out_json);

/* Commands take a resolved configuration. `out_summary` may be NULL. */
ADODE_API adode_status adode_cmd_synth(const char* config_json, char** out_summary);
ADODE_API adode_status adode_cmd_train(const char* config_json, char** out_summary);
ADODE_API adode_status adode_cmd_score(const char* config_json, char** out_summary);
ADODE_API adode_status adode_cmd_eval(const char* config_json, char** out_summary);
ADODE_API adode_status adode_cmd_localize(const char* config_json, char** out_summary);
ADODE_API adode_status adode_cmd_ablate(const char* config_json, char** out_summary);

/* Per-line progress callback for training. */
typedef void (*adode_log_fn)(const char* line, void* user);
ADODE_API adode_status adode_cmd_train_logged(const char* config_json, adode_log_fn log, void* user,
                                              char** out_summary);

ADODE_API adode_status adode_checkpoint_load(const char* path, adode_checkpoint** out);
ADODE_API adode_status adode_checkpoint_save(const adode_checkpoint* ckpt, const char* path);
ADODE_API size_t adode_checkpoint_input_dim(const adode_checkpoint* ckpt);
ADODE_API void adode_checkpoint_free(adode_checkpoint* ckpt);

/* Log-likelihood (nats) and bits per dimension of raw features of length
 * adode_checkpoint_input_dim. `bpd` and `nfe` may be NULL. */
ADODE_API adode_status adode_checkpoint_log_likelihood(const adode_checkpoint* ckpt, const float* values,
                                                       size_t n, uint64_t seed, double rtol, double atol,
                                                       double* log_likelihood, double* bpd, uint64_t* nfe);

ADODE_API adode_status adode_features_read(const char* path, adode_features** out);
ADODE_API adode_features* adode_features_create(void);
/* Appends a copy of an h x w x c row-major tensor. */
ADODE_API adode_status adode_features_add(adode_features* f, const char* scale_id, size_t h, size_t w, size_t c,
                                          const float* values);
ADODE_API adode_status adode_features_write(const adode_features* f, const char* path);
ADODE_API size_t adode_features_count(const adode_features* f);
ADODE_API const char* adode_features_scale_id(const adode_features* f, size_t i);
ADODE_API adode_status adode_features_dims(const adode_features* f, size_t i, size_t* h, size_t* w, size_t* c);
ADODE_API const float* adode_features_data(const adode_features* f, size_t i);
ADODE_API void adode_features_free(adode_features* f);

/* labels: 0 normal, 1 abnormal. */
ADODE_API adode_status adode_auroc(const double* scores, const int* labels, size_t n, double* out);
ADODE_API adode_status adode_best_f1(const double* scores, const int* labels, size_t n, double* f1,
                                     double* threshold);

#ifdef __cplusplus
}
#endif

#endif /* ADODE_ADODE_H_ */
