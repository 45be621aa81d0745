#ifndef FBMLAB_H
#define FBMLAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FbmStatus {
  FBM_STATUS_OK = 0,
  FBM_STATUS_NULL_POINTER = 1,
  FBM_STATUS_DOMAIN = 2,
  FBM_STATUS_DIMENSION_MISMATCH = 3,
  FBM_STATUS_QUADRATURE = 4,
  FBM_STATUS_NOT_POSITIVE_DEFINITE = 5,
  FBM_STATUS_INFEASIBLE = 6,
  FBM_STATUS_INTERNAL = 7,
  FBM_STATUS_PANIC = 8,
} FbmStatus;

/**
 * fBM covariance on a time grid with its Cholesky factor.
 */
typedef struct FbmCovariance FbmCovariance;

/**
 * Kernel K(t, s) for a fixed Hurst parameter.
 */
typedef struct FbmKernel FbmKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *fbm_version(void);

/**
 * Message of the last failed call on this thread; empty if none. Valid until the
 * next failing call on the same thread.
 */
const char *fbm_last_error(void);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum FbmStatus fbm_kernel_new(double hurst, struct FbmKernel **out);

/**
 * # Safety
 * `kernel` must come from [`fbm_kernel_new`] and not be freed twice. Null is ignored.
 */
void fbm_kernel_free(struct FbmKernel *kernel);

/**
 * K(t, s).
 *
 * # Safety
 * `kernel` must be a live handle and `out` writable.
 */
enum FbmStatus fbm_kernel_eval(const struct FbmKernel *kernel, double t, double s, double *out);

/**
 * ∫_a^b K(t, r) dr.
 *
 * # Safety
 * `kernel` must be a live handle and `out` writable.
 */
enum FbmStatus fbm_kernel_cell_integral(const struct FbmKernel *kernel,
                                        double t,
                                        double a,
                                        double b,
                                        double *out);

/**
 * ∫_0^s K(t, u) K(s, u) du for 0 < s <= t.
 *
 * # Safety
 * `kernel` must be a live handle and `out` writable.
 */
enum FbmStatus fbm_kernel_cross_covariance(const struct FbmKernel *kernel,
                                           double s,
                                           double t,
                                           double *out);

/**
 * E|B_t^(m+1) - B_t^(m)|².
 *
 * # Safety
 * `kernel` must be a live handle and `out` writable.
 */
enum FbmStatus fbm_exact_l2_difference(const struct FbmKernel *kernel,
                                       double t,
                                       uint32_t m,
                                       double *out);

/**
 * Covariance of fBM at `n` strictly increasing times in (0, 1].
 *
 * # Safety
 * `times` must point to `n` doubles and `out` be writable.
 */
enum FbmStatus fbm_covariance_new(double hurst,
                                  const double *times,
                                  size_t n,
                                  struct FbmCovariance **out);

/**
 * # Safety
 * `cov` must come from [`fbm_covariance_new`] and not be freed twice. Null is ignored.
 */
void fbm_covariance_free(struct FbmCovariance *cov);

/**
 * # Safety
 * `cov` must be a live handle and `out` writable.
 */
enum FbmStatus fbm_covariance_dim(const struct FbmCovariance *cov, size_t *out);

/**
 * Writes `n_draws` draws, one after another, into `out` (length `out_len`, at least
 * `n_draws * dim`). The same (seed, stream) pair always gives the same draws.
 *
 * # Safety
 * `cov` must be a live handle and `out` must point to `out_len` writable doubles.
 */
enum FbmStatus fbm_covariance_sample(const struct FbmCovariance *cov,
                                     uint64_t seed,
                                     uint64_t stream,
                                     size_t n_draws,
                                     double *out,
                                     size_t out_len);

/**
 * ½ xᵀ Σ⁻¹ x.
 *
 * # Safety
 * `x` must point to `n` doubles and `out` be writable.
 */
enum FbmStatus fbm_rate_fd(const struct FbmCovariance *cov, const double *x, size_t n, double *out);

/**
 * ½((|center|_Σ - radius)⁺)².
 *
 * # Safety
 * `center` must point to `n` doubles and `out` be writable.
 */
enum FbmStatus fbm_rate_ball_inf(const struct FbmCovariance *cov,
                                 const double *center,
                                 size_t n,
                                 double radius,
                                 double *out);

/**
 * Infimum of the rate over {max_k x_k >= a}, or {max_k |x_k| >= a} when
 * `one_sided` is false.
 *
 * # Safety
 * `cov` must be a live handle and `out` writable.
 */
enum FbmStatus fbm_rate_exceedance_inf(const struct FbmCovariance *cov,
                                       double a,
                                       bool one_sided,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FBMLAB_H */
