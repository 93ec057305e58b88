#ifndef TRIMHILL_H
#define TRIMHILL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TrimhillStatus {
  TRIMHILL_STATUS_OK = 0,
  TRIMHILL_STATUS_NULL_POINTER = 1,
  TRIMHILL_STATUS_DOMAIN = 2,
  TRIMHILL_STATUS_SIZE = 3,
  TRIMHILL_STATUS_INDEX = 4,
  TRIMHILL_STATUS_DEGENERATE = 5,
  TRIMHILL_STATUS_SELECTION = 6,
  TRIMHILL_STATUS_BUFFER_TOO_SMALL = 7,
  TRIMHILL_STATUS_INTERNAL = 8,
} TrimhillStatus;

/**
 * Result of sequential outlier testing.
 */
typedef struct TrimhillEwstOutcome TrimhillEwstOutcome;

/**
 * A validated sample sorted in descending order.
 */
typedef struct TrimhillSample TrimhillSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread; empty after a
 * success. Valid until the next call into the library on the same thread.
 */
const char *trimhill_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *trimhill_version(void);

/**
 * Copies `len` values, validates them and sorts them descending.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be writable.
 */
enum TrimhillStatus trimhill_sample_new(const double *values,
                                        size_t len,
                                        struct TrimhillSample **out);

/**
 * # Safety
 * `sample` must come from [`trimhill_sample_new`] and not be freed twice.
 */
void trimhill_sample_free(struct TrimhillSample *sample);

/**
 * Number of values, or 0 for a null handle.
 *
 * # Safety
 * `sample` must be null or a live handle.
 */
size_t trimhill_sample_len(const struct TrimhillSample *sample);

/**
 * Trimmed Hill estimate and its plug-in standard error (`se` may be null).
 *
 * # Safety
 * Handles must be live; `xi` must be writable.
 */
enum TrimhillStatus trimhill_trimmed_hill(const struct TrimhillSample *sample,
                                          size_t k0,
                                          size_t k,
                                          double *xi,
                                          double *se);

/**
 * Classic Hill estimate.
 *
 * # Safety
 * As for [`trimhill_trimmed_hill`].
 */
enum TrimhillStatus trimhill_hill(const struct TrimhillSample *sample, size_t k, double *xi);

/**
 * Writes the `k` estimates for `k0 = 0..k-1` into `buf`. `written` receives
 * `k` in every case, so a call with `capacity = 0` queries the size.
 *
 * # Safety
 * `buf` must have room for `capacity` doubles; `written` must be writable.
 */
enum TrimhillStatus trimhill_trim_path(const struct TrimhillSample *sample,
                                       size_t k,
                                       double *buf,
                                       size_t capacity,
                                       size_t *written);

/**
 * Sequential testing for the number of outliers at tail size `k`.
 * `capped` selects the start rule `min(k - 2, ceil(10 sqrt(k)))`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum TrimhillStatus trimhill_select_k0(const struct TrimhillSample *sample,
                                       size_t k,
                                       double q,
                                       double a,
                                       bool capped,
                                       struct TrimhillEwstOutcome **out);

/**
 * # Safety
 * `outcome` must be null or a live handle.
 */
size_t trimhill_ewst_outcome_k0_hat(const struct TrimhillEwstOutcome *outcome);

/**
 * # Safety
 * `outcome` must be null or a live handle.
 */
size_t trimhill_ewst_outcome_trace_len(const struct TrimhillEwstOutcome *outcome);

/**
 * One scan step; any output pointer may be null.
 *
 * # Safety
 * `outcome` must be a live handle; non-null outputs must be writable.
 */
enum TrimhillStatus trimhill_ewst_outcome_step(const struct TrimhillEwstOutcome *outcome,
                                               size_t index,
                                               size_t *k0,
                                               double *u,
                                               double *threshold,
                                               bool *rejected);

/**
 * # Safety
 * `outcome` must come from [`trimhill_select_k0`] and not be freed twice.
 */
void trimhill_ewst_outcome_free(struct TrimhillEwstOutcome *outcome);

/**
 * Joint selection of `(k0, k)` with default settings.
 *
 * # Safety
 * Handles must be live; outputs must be writable (`converged` may be null).
 */
enum TrimhillStatus trimhill_joint_select(const struct TrimhillSample *sample,
                                          size_t *k0,
                                          size_t *k,
                                          bool *converged);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRIMHILL_H */
