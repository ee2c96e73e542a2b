/*
 * Copyright 2026 The rqat Authors
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

/* C interface to librqat. Every call returns an rqat_status; on failure
 * rqat_last_error() holds a message for the calling thread. Strings
 * returned through char** are owned by the caller and released with
 * rqat_string_free(). */

#ifndef RQAT_RQAT_H
#define RQAT_RQAT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RQAT_API __declspec(dllexport)
#else
#define RQAT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define RQAT_API_VERSION 1

typedef enum rqat_status {
    RQAT_OK = 0,
    RQAT_E_PARAMETER = 1, /* argument outside its domain */
    RQAT_E_SHAPE = 2,     /* mismatched lengths */
    RQAT_E_CONFIG = 3,    /* inconsistent configuration or missing prerequisite */
    RQAT_E_INGEST = 4,    /* unreadable or malformed data / checkpoint */
    RQAT_E_INPUT = 5,     /* empty or invalid input */
    RQAT_E_IO = 6,        /* filesystem failure */
    RQAT_E_INTERNAL = 7
} rqat_status;

typedef struct rqat_config rqat_config;
typedef struct rqat_checkpoint rqat_checkpoint;

RQAT_API int rqat_api_version(void);
RQAT_API const char* rqat_status_name(rqat_status status);
RQAT_API const char* rqat_last_error(void);
RQAT_API void rqat_string_free(char* s);

/* ---- configuration ---------------------------------------------------- */

RQAT_API rqat_status rqat_config_create(rqat_config** out);
RQAT_API rqat_status rqat_config_load(const char* path, rqat_config** out);
RQAT_API rqat_status rqat_config_parse(const char* json, rqat_config** out);
/* "key=value"; unknown keys fail with RQAT_E_CONFIG. */
RQAT_API rqat_status rqat_config_set(rqat_config* config, const char* assignment);
RQAT_API rqat_status rqat_config_validate(const rqat_config* config);
RQAT_API rqat_status rqat_config_to_json(const rqat_config* config, char** out);
RQAT_API void rqat_config_destroy(rqat_config* config);

/* ---- runs ------------------------------------------------------------- */

typedef void (*rqat_progress_fn)(const char* metric_json, void* user);

typedef struct rqat_run_result {
    double final_accuracy;
    int epochs;
} rqat_run_result;

/* Runs the configured mode into output_dir (manifest.json, checkpoint.bin,
 * metrics.jsonl). resume != 0 continues from checkpoint.partial.bin. */
RQAT_API rqat_status rqat_run(const rqat_config* config, int resume, rqat_progress_fn progress, void* user,
                              rqat_run_result* out);

/* ---- checkpoints ------------------------------------------------------ */

RQAT_API rqat_status rqat_checkpoint_load(const char* path, rqat_checkpoint** out);
RQAT_API rqat_status rqat_checkpoint_save(const rqat_checkpoint* checkpoint, const char* path);
/* JSON summary: mode, phase, epochs, final accuracy, per-layer layout. */
RQAT_API rqat_status rqat_checkpoint_info(const rqat_checkpoint* checkpoint, char** out);
RQAT_API void rqat_checkpoint_destroy(rqat_checkpoint* checkpoint);

typedef struct rqat_injection {
    int faults;             /* nonzero: sample stuck-at faults */
    double fault_rate;      /* per bit cell, in [0, 1] */
    uint64_t fault_seed;
    int variability;        /* nonzero: sample device variability */
    double sigma_over_mu;
    uint64_t variability_seed;
} rqat_injection;

/* Adds non-idealities to a mapped checkpoint without retraining. */
RQAT_API rqat_status rqat_checkpoint_inject(rqat_checkpoint* checkpoint, const rqat_injection* injection);

/* Eval-split accuracy. overrides are "key=value" config edits (may be NULL
 * when count is 0). When out_dir is non-NULL a manifest.json is written. */
RQAT_API rqat_status rqat_evaluate(const rqat_checkpoint* checkpoint, const char* const* overrides, size_t count,
                                   const char* out_dir, char** report_json);

typedef struct rqat_simulation_options {
    int analog;           /* 0: digital arrays, 1: analog arrays */
    int accumulator_bits; /* 0: exact */
    rqat_injection injection;
} rqat_simulation_options;

RQAT_API rqat_status rqat_simulate(const rqat_checkpoint* checkpoint, const rqat_simulation_options* options,
                                   const char* const* overrides, size_t count, const char* out_dir,
                                   char** report_json);

/* Scans manifest.json files below sweep_dir; writes CSV tables and PNGs. */
RQAT_API rqat_status rqat_report(const char* sweep_dir, const char* out_dir, char** summary_json);

/* ---- primitives ------------------------------------------------------- */

/* Nearest level of {<r, S> + offset}; ties go to the smaller code. */
RQAT_API rqat_status rqat_quantize(const double* multipliers, int bits, double offset, const double* x, size_t n,
                                   double* values, uint32_t* codes);
RQAT_API rqat_status rqat_lambda_at(double lambda_init, double lambda_final, int total_epochs, int ramp_epochs,
                                    int epoch, double* out);
/* One LIF step over n neurons; v is updated in place. */
RQAT_API rqat_status rqat_lif_step(const double* input, double* v, size_t n, double beta, double v_threshold,
                                   double v_reset, double* spikes);
/* y[rows] from integer input codes x[cols] and row-major weight codes. */
RQAT_API rqat_status rqat_bit_sliced_matvec(const int64_t* input_codes, size_t cols, const uint32_t* weight_codes,
                                            size_t rows, const double* multipliers, int bits, double offset,
                                            double act_scale, double* y);

#ifdef __cplusplus
}
#endif

#endif /* RQAT_RQAT_H */
