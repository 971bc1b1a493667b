/*===-- sluice.h - Public C API -----------------------------------*- C -*-===*
 *
 * Part of the Sluice project, under the Apache License v2.0.
 * SPDX-License-Identifier: Apache-2.0
 *
 *===----------------------------------------------------------------------===*
 *
 * Stable C interface to the dataflow optimizer: parse a program, analyze it,
 * run the optimization pipeline, or simulate it. Handles are opaque; every
 * function returns a status code and reports details through an error string
 * released with sluice_string_free().
 *
 *===----------------------------------------------------------------------===*/

#ifndef SLUICE_SLUICE_H
#define SLUICE_SLUICE_H

#include <stdint.h>

#if defined(_WIN32)
#define SLUICE_API __declspec(dllexport)
#else
#define SLUICE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sluice_status {
  SLUICE_OK = 0,
  SLUICE_ERR_INTERNAL = 1,
  SLUICE_ERR_PARSE = 2,        /* malformed input or broken invariant */
  SLUICE_ERR_UNRESOLVABLE = 3, /* violation no transformation could fix */
  SLUICE_ERR_BUDGET = 4,       /* resource budget infeasible */
  SLUICE_ERR_TIMEOUT = 5,      /* simulation exceeded its cycle cap */
  SLUICE_ERR_VALIDATION = 6    /* bad argument outside program parsing */
} sluice_status;

typedef struct sluice_program sluice_program;
typedef struct sluice_artifacts sluice_artifacts;

typedef enum sluice_artifact_kind {
  SLUICE_ARTIFACT_PROGRAM = 0,    /* transformed program JSON */
  SLUICE_ARTIFACT_VIOLATIONS = 1, /* pre-pass violation report JSON */
  SLUICE_ARTIFACT_TRANSFORMS = 2, /* transformation log JSON */
  SLUICE_ARTIFACT_BUFFERS = 3,    /* buffer decisions + transfer plan JSON */
  SLUICE_ARTIFACT_DSE = 4,        /* DSE report JSON */
  SLUICE_ARTIFACT_REPORT = 5,     /* aggregate report JSON */
  SLUICE_ARTIFACT_SIM = 6,        /* simulation result JSON */
  SLUICE_ARTIFACT_TRACE = 7,      /* per-op trace, JSON lines */
  SLUICE_ARTIFACT_OCCUPANCY = 8   /* channel occupancy CSV */
} sluice_artifact_kind;

/* Pipeline and simulation options. Initialize with sluice_options_init and
 * override fields as needed; string fields may stay NULL. */
typedef struct sluice_options {
  double threshold;        /* balancing threshold n (default 2.0) */
  int64_t max_parallel;    /* parallelism ceiling (default 64) */
  int64_t budget_dsp;      /* resource budget; defaults match an Alveo U280 */
  int64_t budget_bram18k;
  int64_t budget_ff;
  int64_t budget_lut;
  int max_up_iters;        /* upscaling iteration limit (default 10) */
  int enable_downscale;    /* run the downscaling stage (default 1) */
  int hbm_channels;        /* off-chip channels (default 1) */
  int64_t fifo_depth;      /* default FIFO depth in elements (default 2) */
  int64_t max_cycles;      /* simulation cap; 0 = automatic */
  int int_mode;            /* 1 = exact integer numerics (default 0) */
  int collect_trace;       /* 1 = record per-op trace and occupancy */
  const char *stop_after;  /* "coarse"|"fine"|"buffers"|"reuse"|"hbm"|"dse" */
  const char *cost_table_json; /* overrides the built-in cost table */
  const char *device_json;     /* overrides the built-in device limits */
  const char *sim_buffers; /* raw-simulation buffer kind: "fifo" (default),
                              "pingpong", or "sequential" */
} sluice_options;

SLUICE_API void sluice_options_init(sluice_options *opts);

SLUICE_API const char *sluice_version(void);

/* Parses and validates a program from JSON text. */
SLUICE_API sluice_status sluice_program_parse(const char *json_text,
                                              sluice_program **out,
                                              char **error);

/* Canonical JSON of the program (round-trips through parse). */
SLUICE_API sluice_status sluice_program_serialize(const sluice_program *prog,
                                                  char **out);

SLUICE_API void sluice_program_free(sluice_program *prog);

/* Deterministic random input tensors for every external input array,
 * serialized as a tensor JSON object. */
SLUICE_API sluice_status sluice_random_inputs(const sluice_program *prog,
                                              uint64_t seed, int int_mode,
                                              char **out);

/* Detects violations without transforming; emits the violation report. */
SLUICE_API sluice_status sluice_analyze(const sluice_program *prog,
                                        char **report_json, char **error);

/* Runs the full pipeline. `inputs_json` (nullable) adds a validating
 * simulation of the final design. */
SLUICE_API sluice_status sluice_optimize(const sluice_program *prog,
                                         const sluice_options *opts,
                                         const char *inputs_json,
                                         sluice_artifacts **out, char **error);

/* Simulates the program as-is (no transformation); every edge gets the
 * buffer kind named by opts->sim_buffers. A deadlock is a result, not an
 * error; only a cycle-cap overrun fails. */
SLUICE_API sluice_status sluice_simulate(const sluice_program *prog,
                                         const sluice_options *opts,
                                         const char *inputs_json,
                                         sluice_artifacts **out, char **error);

/* Borrowed pointer, valid until sluice_artifacts_free; NULL when absent. */
SLUICE_API const char *sluice_artifacts_get(const sluice_artifacts *arts,
                                            sluice_artifact_kind kind);

SLUICE_API void sluice_artifacts_free(sluice_artifacts *arts);
SLUICE_API void sluice_string_free(char *str);

#ifdef __cplusplus
}
#endif

#endif /* SLUICE_SLUICE_H */
