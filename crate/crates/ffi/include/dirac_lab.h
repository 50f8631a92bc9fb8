#ifndef DIRAC_LAB_H
#define DIRAC_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DlStatus {
  DL_STATUS_OK = 0,
  DL_STATUS_NULL_POINTER = 1,
  DL_STATUS_INVALID_ARGUMENT = 2,
  DL_STATUS_CONFIG = 3,
  DL_STATUS_FAMILY = 4,
  DL_STATUS_SPECTRAL = 5,
  DL_STATUS_CONVERGENCE = 6,
  DL_STATUS_NUMERICAL = 7,
  DL_STATUS_IO = 8,
  DL_STATUS_BUFFER_TOO_SMALL = 9,
  DL_STATUS_PANIC = 10,
} DlStatus;

typedef enum DlDirection {
  DL_DIRECTION_OUT = 0,
  DL_DIRECTION_IN = 1,
} DlDirection;

/**
 * Metric family description.
 */
typedef struct DlFamily DlFamily;

/**
 * A family on a grid, reduced and assembled.
 */
typedef struct DlProblem DlProblem;

/**
 * A Moller limit `c^+-` with its diagnostics.
 */
typedef struct DlScattering DlScattering;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dl_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `len > 0`).  Returns the full message length
 * in bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t dl_last_error(char *buf, size_t len);

/**
 * Built-in family by name (`flat`, `static`, `bump`, `cosmological-ramp`,
 * `shifted`).  A NaN `mu` keeps the default exponent.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be valid for writing.
 */
enum DlStatus dl_family_builtin(const char *name, double mu, struct DlFamily **out);

/**
 * Family from the body of a `[family]` table in TOML.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be valid for writing.
 */
enum DlStatus dl_family_from_toml(const char *toml, struct DlFamily **out);

/**
 * # Safety
 * `family` must come from `dl_family_*` and not be used afterwards.
 */
void dl_family_free(struct DlFamily *family);

/**
 * Reduces the family and sets it up on `points` nodes (even, at least 4).
 *
 * # Safety
 * `family` must be a live handle; `out` must be valid for writing.
 */
enum DlStatus dl_problem_new(const struct DlFamily *family,
                             uint32_t points,
                             struct DlProblem **out);

/**
 * # Safety
 * `problem` must come from `dl_problem_new` and not be used afterwards.
 */
void dl_problem_free(struct DlProblem *problem);

/**
 * Matrix dimension `2 M`.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be valid for writing.
 */
enum DlStatus dl_problem_dim(const struct DlProblem *problem, size_t *out);

/**
 * Reduced Hamiltonian at time `t` into `buf` (`len` doubles).
 *
 * # Safety
 * `problem` must be a live handle; `buf` must be valid for `len` doubles.
 */
enum DlStatus dl_problem_hamiltonian(const struct DlProblem *problem,
                                     double t,
                                     double *buf,
                                     size_t len);

/**
 * Moller limit on the geometric schedule `10, 20, ... <= t_max` with
 * stepper tolerance `tol` (NaN keeps the default).
 *
 * # Safety
 * `problem` must be a live handle; `out` must be valid for writing.
 */
enum DlStatus dl_scattering_compute(const struct DlProblem *problem,
                                    enum DlDirection direction,
                                    double t_max,
                                    double tol,
                                    struct DlScattering **out);

/**
 * # Safety
 * `s` must come from `dl_scattering_compute` and not be used afterwards.
 */
void dl_scattering_free(struct DlScattering *s);

/**
 * Fitted decay exponent of the Moller differences; NaN when the sequence
 * was constant.
 *
 * # Safety
 * `s` must be a live handle; `out` must be valid for writing.
 */
enum DlStatus dl_scattering_mu_hat(const struct DlScattering *s, double *out);

/**
 * # Safety
 * `s` must be a live handle; `out` must be valid for writing.
 */
enum DlStatus dl_scattering_tail_bound(const struct DlScattering *s, double *out);

/**
 * Largest projection residual (idempotency, completeness, selfadjointness).
 *
 * # Safety
 * `s` must be a live handle; `out` must be valid for writing.
 */
enum DlStatus dl_scattering_residual(const struct DlScattering *s, double *out);

/**
 * `c^+` for `sign > 0`, `c^-` otherwise, into `buf` (`len` doubles).
 *
 * # Safety
 * `s` must be a live handle; `buf` must be valid for `len` doubles.
 */
enum DlStatus dl_scattering_projection(const struct DlScattering *s,
                                       int32_t sign,
                                       double *buf,
                                       size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIRAC_LAB_H */
