#ifndef FKLAB_H
#define FKLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum {
  FKLAB_STATUS_OK = 0,
  FKLAB_STATUS_NULL_ARGUMENT = 1,
  FKLAB_STATUS_INVALID_UTF8 = 2,
  FKLAB_STATUS_DOMAIN = 3,
  FKLAB_STATUS_CONFIG = 4,
  FKLAB_STATUS_NUMERIC = 5,
  FKLAB_STATUS_RESOLUTION = 6,
  FKLAB_STATUS_DIVERGENCE = 7,
  FKLAB_STATUS_BEYOND_HORIZON = 8,
  FKLAB_STATUS_OUT_OF_CLASS = 9,
  FKLAB_STATUS_DEGENERATE = 10,
  FKLAB_STATUS_UNSUPPORTED = 11,
  FKLAB_STATUS_IO = 12,
  FKLAB_STATUS_BUFFER_TOO_SMALL = 13,
  FKLAB_STATUS_PANIC = 14,
} FklabStatus;

/**
 * A resolved model: parameters, domain, measure and jump functional.
 */
typedef struct FklabModel FklabModel;

/**
 * A finished series run with its certificates.
 */
typedef struct FklabSeries FklabSeries;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t fklab_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fklab_version(void);

/**
 * Builds a model from the model fields of a JSON configuration (`preset`,
 * `d`, `alpha`, `gamma`, `c0`, `m`, `geometry`, `mu`, `jump`).
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
FklabStatus fklab_model_from_json(const char *json, FklabModel **out);

/**
 * Builds a named preset with its default parameters.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
FklabStatus fklab_model_from_preset(const char *name, FklabModel **out);

/**
 * # Safety
 * `m` must be null or a handle from this library, freed once.
 */
void fklab_model_free(FklabModel *m);

/**
 * Dimension of the model.
 *
 * # Safety
 * `m` must be a live handle; `out` writable.
 */
FklabStatus fklab_model_dim(const FklabModel *m, size_t *out);

/**
 * Comparison kernel `q(t, x, y)`; `x` and `y` hold `d` coordinates.
 *
 * # Safety
 * `x`, `y` must point to `d` doubles; `out` writable.
 */
FklabStatus fklab_q(const FklabModel *m, double t, const double *x, const double *y, double *out);

/**
 * Boundary factor `psi_gamma(t, x, y)` of the model's domain.
 *
 * # Safety
 * As for `fklab_q`.
 */
FklabStatus fklab_psi(const FklabModel *m, double t, const double *x, const double *y, double *out);

/**
 * Two-sided band `psi q / c0 <= . <= c0 psi q`, for `0 < t <= 1`.
 *
 * # Safety
 * As for `fklab_q`; `lower` and `upper` writable.
 */
FklabStatus fklab_band(const FklabModel *m,
                       double t,
                       const double *x,
                       const double *y,
                       double *lower,
                       double *upper);

/**
 * `N_{|mu|}(t) + N_{|F_1|}(t)` of the model.
 *
 * # Safety
 * `m` live; `out` writable.
 */
FklabStatus fklab_perturbation_norm(const FklabModel *m, double t, double *out);

/**
 * Runs the series; `setup_json` may be null for defaults.
 *
 * # Safety
 * `m` live; `setup_json` null or NUL-terminated; `out` writable.
 */
FklabStatus fklab_series_run(const FklabModel *m, const char *setup_json, FklabSeries **out);

/**
 * # Safety
 * `s` must be null or a handle from this library, freed once.
 */
void fklab_series_free(FklabSeries *s);

/**
 * Horizon `t1`, whether every certificate held, and the grid shape.
 *
 * # Safety
 * `s` live; outputs writable.
 */
FklabStatus fklab_series_info(const FklabSeries *s,
                              double *t1,
                              bool *passed,
                              size_t *n_times,
                              size_t *n_x);

/**
 * Grid time `ti` and node `xi`.
 *
 * # Safety
 * `s` live; outputs writable.
 */
FklabStatus fklab_series_node(const FklabSeries *s, size_t ti, size_t xi, double *t, double *x);

/**
 * `p0` and the summed kernel `q` at grid indices.
 *
 * # Safety
 * `s` live; outputs writable.
 */
FklabStatus fklab_series_value(const FklabSeries *s,
                               size_t ti,
                               size_t xi,
                               size_t yi,
                               double *p0,
                               double *q);

/**
 * Writes the full outcome as JSON into `buf`; `needed` receives the size
 * including the NUL. Returns `BufferTooSmall` when `len < needed`.
 *
 * # Safety
 * `buf` null or `len` writable bytes; `needed` writable.
 */
FklabStatus fklab_series_json(const FklabSeries *s, char *buf, size_t len, size_t *needed);

/**
 * Sweeps the three-point product inequality with `n` samples; reports the
 * largest ratio, the constant it is checked against, and the verdict.
 *
 * # Safety
 * Outputs writable.
 */
FklabStatus fklab_certify_ppp(size_t d,
                              double alpha,
                              size_t n,
                              uint64_t seed,
                              double *max_ratio,
                              double *constant,
                              bool *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FKLAB_H */
