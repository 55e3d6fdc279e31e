#ifndef MONOREG_H
#define MONOREG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MonoregStatus {
  MONOREG_STATUS_OK = 0,
  MONOREG_STATUS_NULL_POINTER = 1,
  /**
   * Bad configuration, arguments or input data.
   */
  MONOREG_STATUS_INVALID_INPUT = 2,
  /**
   * A computation failed.
   */
  MONOREG_STATUS_RUNTIME = 3,
  /**
   * The output buffer is shorter than the result.
   */
  MONOREG_STATUS_BUFFER_TOO_SMALL = 4,
  MONOREG_STATUS_PANIC = 5,
} MonoregStatus;

typedef struct MonoregConfig MonoregConfig;

typedef struct MonoregFarField MonoregFarField;

typedef struct MonoregReconstruction MonoregReconstruction;

/**
 * Message of the last failed call on this thread, or null.
 *
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *monoreg_last_error(void);

/**
 * Forces single-threaded linear algebra for bit-identical reruns.
 */
void monoreg_set_deterministic(void);

/**
 * Default experiment configuration. Never null.
 */
struct MonoregConfig *monoreg_config_default(void);

/**
 * Parses and validates a JSON configuration.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum MonoregStatus monoreg_config_from_json(const char *json, struct MonoregConfig **out);

/**
 * Serializes the configuration; release the string with [`monoreg_string_free`].
 *
 * # Safety
 * `cfg` must come from this library; `out` must be writable.
 */
enum MonoregStatus monoreg_config_to_json(const struct MonoregConfig *cfg, char **out);

/**
 * Overrides seed, noise level and wave number, then revalidates.
 *
 * # Safety
 * `cfg` must come from this library.
 */
enum MonoregStatus monoreg_config_set(struct MonoregConfig *cfg,
                                      uint64_t seed,
                                      double noise_level,
                                      double wave_number);

/**
 * # Safety
 * `cfg` must come from this library; `dir` must be a NUL-terminated path.
 */
enum MonoregStatus monoreg_config_set_output_dir(struct MonoregConfig *cfg, const char *dir);

/**
 * # Safety
 * `cfg` must come from this library or be null; it must not be used afterwards.
 */
void monoreg_config_free(struct MonoregConfig *cfg);

/**
 * Simulates noisy far-field data for the configured scene.
 *
 * # Safety
 * `cfg` must come from this library; `out` must be writable.
 */
enum MonoregStatus monoreg_simulate(const struct MonoregConfig *cfg, struct MonoregFarField **out);

/**
 * Number of directions `N`; the matrix is `N x N`. Returns 0 for null.
 *
 * # Safety
 * `f` must come from this library or be null.
 */
size_t monoreg_far_field_size(const struct MonoregFarField *f);

/**
 * Copies the far-field matrix in row-major order into `re` and `im` (`len >= N*N` each).
 *
 * # Safety
 * `f` must come from this library; `re` and `im` must hold `len` doubles.
 */
enum MonoregStatus monoreg_far_field_copy(const struct MonoregFarField *f,
                                          double *re,
                                          double *im,
                                          size_t len);

/**
 * # Safety
 * `f` must come from this library or be null; it must not be used afterwards.
 */
void monoreg_far_field_free(struct MonoregFarField *f);

/**
 * Monotonicity bounds and the regularized minimizer for `f`.
 *
 * # Safety
 * `cfg` and `f` must come from this library; `out` must be writable.
 */
enum MonoregStatus monoreg_reconstruct(const struct MonoregConfig *cfg,
                                       const struct MonoregFarField *f,
                                       struct MonoregReconstruction **out);

/**
 * Number of pixels `M`. Returns 0 for null.
 *
 * # Safety
 * `r` must come from this library or be null.
 */
size_t monoreg_reconstruction_len(const struct MonoregReconstruction *r);

/**
 * Copies the reconstructed coefficients (pixel order, `x` fastest).
 *
 * # Safety
 * `r` must come from this library; `out` must hold `len` doubles.
 */
enum MonoregStatus monoreg_reconstruction_coefficients(const struct MonoregReconstruction *r,
                                                       double *out,
                                                       size_t len);

/**
 * Copies the box bounds `b_m = min(q_min, beta*_m)`.
 *
 * # Safety
 * `r` must come from this library; `out` must hold `len` doubles.
 */
enum MonoregStatus monoreg_reconstruction_bounds(const struct MonoregReconstruction *r,
                                                 double *out,
                                                 size_t len);

/**
 * Final objective value. NaN for null.
 *
 * # Safety
 * `r` must come from this library or be null.
 */
double monoreg_reconstruction_objective(const struct MonoregReconstruction *r);

/**
 * # Safety
 * `r` must come from this library or be null; it must not be used afterwards.
 */
void monoreg_reconstruction_free(struct MonoregReconstruction *r);

/**
 * Runs the full pipeline into the configured output directory.
 *
 * On success `metrics_json` (if not null) receives the metrics document;
 * release it with [`monoreg_string_free`].
 *
 * # Safety
 * `cfg` must come from this library; `metrics_json` must be null or writable.
 */
enum MonoregStatus monoreg_run_pipeline(const struct MonoregConfig *cfg, char **metrics_json);

/**
 * Runs the oracle suite; `passed` receives whether every check passed.
 *
 * # Safety
 * `passed` must be writable.
 */
enum MonoregStatus monoreg_selftest(bool *passed);

/**
 * # Safety
 * `s` must be a string returned by this library or null.
 */
void monoreg_string_free(char *s);

#endif  /* MONOREG_H */
