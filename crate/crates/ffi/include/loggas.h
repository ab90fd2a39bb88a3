#ifndef LOGGAS_H
#define LOGGAS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum LoggasStatus {
  LOGGAS_STATUS_OK = 0,
  LOGGAS_STATUS_REJECTED_INPUT = 1,
  LOGGAS_STATUS_SUPPORT_NOT_NORMALIZED = 2,
  LOGGAS_STATUS_CRITICAL_OR_MULTI_CUT = 3,
  LOGGAS_STATUS_EULER_LAGRANGE = 4,
  LOGGAS_STATUS_NO_ONE_CUT_NORMALIZATION = 5,
  LOGGAS_STATUS_NEAR_CRITICAL_EDGE = 6,
  LOGGAS_STATUS_INVERSION_RESIDUAL = 7,
  LOGGAS_STATUS_OUTLIER_CONFIGURATION = 8,
  LOGGAS_STATUS_FREENESS_VIOLATED = 9,
  LOGGAS_STATUS_COLLISION = 10,
  LOGGAS_STATUS_EIGEN_NO_CONVERGENCE = 11,
  LOGGAS_STATUS_CONFIG = 12,
  LOGGAS_STATUS_BATCH_FORMAT = 13,
  LOGGAS_STATUS_IO = 14,
  LOGGAS_STATUS_JSON = 15,
  /**
   * A null pointer or non-UTF-8 string was passed.
   */
  LOGGAS_STATUS_INVALID_ARGUMENT = 16,
  LOGGAS_STATUS_PANIC = 99,
} LoggasStatus;

/**
 * Equilibrium measure of a one-cut potential.
 */
typedef struct LoggasEquilibrium LoggasEquilibrium;

/**
 * Inverse of the master operator applied to one test function.
 */
typedef struct LoggasInversion LoggasInversion;

/**
 * Limiting mean and covariance of a vector of linear statistics.
 */
typedef struct LoggasPrediction LoggasPrediction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes, excluding
 * the terminator; pass `len = 0` to query it.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t loggas_last_error_message(char *buf, size_t len);

/**
 * Static, NUL-terminated name of a status value, e.g. `"support_not_normalized"`;
 * `"unknown"` for values outside [`LoggasStatus`].
 */
const char *loggas_status_name(int32_t status);

/**
 * Build the equilibrium of a potential spec such as `"poly:0,0,1"`, with
 * neighbourhood width `delta` (0.1 is the usual choice).
 *
 * # Safety
 * `potential` must be a NUL-terminated string; `out` must be writable.
 */
enum LoggasStatus loggas_equilibrium_new(const char *potential,
                                         double delta,
                                         struct LoggasEquilibrium **out);

/**
 * # Safety
 * `eq` must be null or a handle from [`loggas_equilibrium_new`] not yet freed.
 */
void loggas_equilibrium_free(struct LoggasEquilibrium *eq);

/**
 * Density of the equilibrium measure at `x`; zero off the support.
 *
 * # Safety
 * `eq` must be a live handle; `out` must be writable.
 */
enum LoggasStatus loggas_equilibrium_density(const struct LoggasEquilibrium *eq,
                                             double x,
                                             double *out);

/**
 * Writes the `j/n` quantiles, `j = 1..=n`, into `out[0..n]`.
 *
 * # Safety
 * `eq` must be a live handle; `out` must hold `n` doubles.
 */
enum LoggasStatus loggas_equilibrium_quantiles(const struct LoggasEquilibrium *eq,
                                               size_t n,
                                               double *out);

/**
 * Invert the master operator for the test function spec `xi` (e.g. `"cheb:0,0,1"`).
 *
 * # Safety
 * `eq` must be a live handle, `xi` a NUL-terminated string, `out` writable.
 */
enum LoggasStatus loggas_inversion_new(const struct LoggasEquilibrium *eq,
                                       const char *xi,
                                       struct LoggasInversion **out);

/**
 * # Safety
 * `inv` must be null or a handle from [`loggas_inversion_new`] not yet freed.
 */
void loggas_inversion_free(struct LoggasInversion *inv);

/**
 * The constant `c` with `Theta_V psi = xi + c`.
 *
 * # Safety
 * `inv` must be a live handle; `out` must be writable.
 */
enum LoggasStatus loggas_inversion_constant(const struct LoggasInversion *inv, double *out);

/**
 * Largest round-trip residual measured on the neighbourhood of the support.
 *
 * # Safety
 * `inv` must be a live handle; `out` must be writable.
 */
enum LoggasStatus loggas_inversion_residual(const struct LoggasInversion *inv, double *out);

/**
 * The solution `psi` at `x`.
 *
 * # Safety
 * `inv` must be a live handle; `out` must be writable.
 */
enum LoggasStatus loggas_inversion_eval(const struct LoggasInversion *inv, double x, double *out);

/**
 * Predicted limit for `count` test function specs at inverse temperature `beta`.
 *
 * # Safety
 * `eq` must be a live handle, `xis` must point to `count` NUL-terminated
 * strings and `out` must be writable.
 */
enum LoggasStatus loggas_prediction_new(const struct LoggasEquilibrium *eq,
                                        const char *const *xis,
                                        size_t count,
                                        double beta,
                                        struct LoggasPrediction **out);

/**
 * # Safety
 * `pred` must be null or a handle from [`loggas_prediction_new`] not yet freed.
 */
void loggas_prediction_free(struct LoggasPrediction *pred);

/**
 * Number of test functions in the prediction; 0 for a null handle.
 *
 * # Safety
 * `pred` must be null or a live handle.
 */
size_t loggas_prediction_dim(const struct LoggasPrediction *pred);

/**
 * Limiting mean of statistic `i`.
 *
 * # Safety
 * `pred` must be a live handle; `out` must be writable.
 */
enum LoggasStatus loggas_prediction_mean(const struct LoggasPrediction *pred,
                                         size_t i,
                                         double *out);

/**
 * Limiting covariance entry `(i, j)`.
 *
 * # Safety
 * `pred` must be a live handle; `out` must be writable.
 */
enum LoggasStatus loggas_prediction_covariance(const struct LoggasPrediction *pred,
                                               size_t i,
                                               size_t j,
                                               double *out);

/**
 * Draw one Gaussian beta-ensemble configuration of size `n` (sorted) into `out[0..n]`.
 *
 * # Safety
 * `out` must hold `n` doubles.
 */
enum LoggasStatus loggas_sample_gbe(size_t n, double beta, uint64_t seed, double *out);

/**
 * Centered linear statistic `sum xi(lambda_i) - n int xi d mu_V`.
 *
 * # Safety
 * `eq` must be a live handle, `xi` a NUL-terminated string, `lambdas` must
 * hold `n` doubles and `out` must be writable.
 */
enum LoggasStatus loggas_linear_statistic(const struct LoggasEquilibrium *eq,
                                          const char *xi,
                                          const double *lambdas,
                                          size_t n,
                                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOGGAS_H */
