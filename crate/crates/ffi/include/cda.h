#ifndef CDA_H
#define CDA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CdaStatus {
  CDA_STATUS_OK = 0,
  CDA_STATUS_NULL_POINTER = 1,
  /*
   Bad arguments or configuration.
   */
  CDA_STATUS_INVALID_INPUT = 2,
  /*
   Singular system, non-finite values, solver failure or no decay.
   */
  CDA_STATUS_NUMERICAL = 3,
  CDA_STATUS_IO = 4,
  /*
   Index past the end of a collection.
   */
  CDA_STATUS_OUT_OF_RANGE = 5,
  /*
   A Rust panic was caught at the boundary.
   */
  CDA_STATUS_PANIC = 6,
} CdaStatus;

/*
 Nudging form for finite `mu`; `mu = INFINITY` always means direct enforcement.
 */
typedef enum CdaNudging {
  CDA_NUDGING_GALERKIN = 0,
  CDA_NUDGING_LUMPED = 1,
} CdaNudging;

typedef struct CdaConfig CdaConfig;

typedef struct CdaHeatCase CdaHeatCase;

typedef struct CdaManifest CdaManifest;

typedef struct CdaSeries CdaSeries;

typedef struct CdaRecord {
  uintptr_t step;
  double time;
  double l2_error;
  double h1_error;
} CdaRecord;

typedef struct CdaDecayFit {
  double log_slope;
  double plateau;
  uintptr_t onset_step;
} CdaDecayFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *cda_last_error(void);

/*
 Heat assimilation case with the spatial-convergence defaults at `1/n`:
 barycentric P2 mesh, κ = 1, Δt = 0.001, T = 0.3, direct enforcement, H = 1/9.

 # Safety
 `out_case` must be valid for writes.
 */
enum CdaStatus cda_heat_case_new(uintptr_t n, struct CdaHeatCase **out_case);

/*
 # Safety
 `case` must come from [`cda_heat_case_new`].
 */
enum CdaStatus cda_heat_case_set_time(struct CdaHeatCase *case_, double dt, double t_final);

/*
 `mu` may be `INFINITY` for direct enforcement or 0 for a free run.

 # Safety
 `case` must come from [`cda_heat_case_new`].
 */
enum CdaStatus cda_heat_case_set_nudging(struct CdaHeatCase *case_,
                                         double mu,
                                         enum CdaNudging mode,
                                         double coarse_width);

/*
 # Safety
 `case` must come from [`cda_heat_case_new`] or be null.
 */
void cda_heat_case_free(struct CdaHeatCase *case_);

/*
 Runs the case; the error series is returned in `out_series`.

 # Safety
 `case` must come from [`cda_heat_case_new`]; `out_series` must be valid
 for writes.
 */
enum CdaStatus cda_heat_run(const struct CdaHeatCase *case_, struct CdaSeries **out_series);

/*
 # Safety
 `series` must come from this library.
 */
enum CdaStatus cda_series_len(const struct CdaSeries *series, uintptr_t *out_len);

/*
 # Safety
 `series` must come from this library; `out_record` must be valid for writes.
 */
enum CdaStatus cda_series_get(const struct CdaSeries *series,
                              uintptr_t index,
                              struct CdaRecord *out_record);

/*
 Writes the series as `step,time,l2_error,h1_error` CSV.

 # Safety
 `series` must come from this library; `path` must be a NUL-terminated string.
 */
enum CdaStatus cda_series_write_csv(const struct CdaSeries *series, const char *path);

/*
 Exponential rate, plateau and onset of an error series.

 # Safety
 `series` must come from this library; `out_fit` must be valid for writes.
 */
enum CdaStatus cda_series_decay(const struct CdaSeries *series, struct CdaDecayFit *out_fit);

/*
 # Safety
 `series` must come from this library or be null.
 */
void cda_series_free(struct CdaSeries *series);

/*
 Observed orders between consecutive rows; `out_rates` receives `n - 1` values.

 # Safety
 `resolutions` and `errors` must hold `n` values, `out_rates` room for `n - 1`.
 */
enum CdaStatus cda_convergence_rates(const double *resolutions,
                                     const double *errors,
                                     uintptr_t n,
                                     double *out_rates);

/*
 Loads and validates a TOML experiment config.

 # Safety
 `path` must be a NUL-terminated string; `out_config` must be valid for writes.
 */
enum CdaStatus cda_config_load(const char *path, struct CdaConfig **out_config);

/*
 Overrides the output directory of a loaded config.

 # Safety
 `config` must come from [`cda_config_load`]; `dir` must be a NUL-terminated string.
 */
enum CdaStatus cda_config_set_output(struct CdaConfig *config, const char *dir);

/*
 # Safety
 `config` must come from [`cda_config_load`] or be null.
 */
void cda_config_free(struct CdaConfig *config);

/*
 Runs every point of the config's sweep and writes its artifacts.

 # Safety
 `config` must come from [`cda_config_load`]; `out_manifest` must be valid for writes.
 */
enum CdaStatus cda_config_run(const struct CdaConfig *config, struct CdaManifest **out_manifest);

/*
 # Safety
 `manifest` must come from [`cda_config_run`].
 */
enum CdaStatus cda_manifest_run_count(const struct CdaManifest *manifest, uintptr_t *out_count);

/*
 Final-time errors of run `index`.

 # Safety
 `manifest` must come from [`cda_config_run`]; the outputs must be valid for writes.
 */
enum CdaStatus cda_manifest_run_errors(const struct CdaManifest *manifest,
                                       uintptr_t index,
                                       double *out_l2,
                                       double *out_h1);

/*
 # Safety
 `manifest` must come from [`cda_config_run`] or be null.
 */
void cda_manifest_free(struct CdaManifest *manifest);

/*
 Runs the property suite; counts are written to the outputs.

 # Safety
 The outputs must be valid for writes.
 */
enum CdaStatus cda_verify_properties(uint64_t seed, uintptr_t *out_passed, uintptr_t *out_total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CDA_H */
