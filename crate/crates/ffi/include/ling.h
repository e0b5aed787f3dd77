#ifndef LING_H
#define LING_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum LingStatus {
  LING_STATUS_OK = 0,
  LING_STATUS_NULL_POINTER = 1,
  LING_STATUS_INVALID_ARGUMENT = 2,
  LING_STATUS_SHAPE_MISMATCH = 3,
  /**
   * Singular system, rank deficiency, breakdown or non-convergence.
   */
  LING_STATUS_NUMERICAL = 4,
  /**
   * SVRG objective blew up; retry with a smaller step.
   */
  LING_STATUS_DIVERGED = 5,
  LING_STATUS_IO = 6,
  LING_STATUS_PANIC = 7,
} LingStatus;

/**
 * A fitted coefficient vector with its cost.
 */
typedef struct LingFit LingFit;

/**
 * Training design and response.
 */
typedef struct LingProblem LingProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ling_last_error_message(void);

/**
 * Copies an `n×p` row-major design and a length-`n` response.
 *
 * # Safety
 * `x` must be valid for `n*p` reads, `y` for `n` reads and `out` for one
 * write.
 */
enum LingStatus ling_problem_new(const double *x,
                                 size_t n,
                                 size_t p,
                                 const double *y,
                                 struct LingProblem **out);

/**
 * # Safety
 * `problem` must be null or a handle not yet freed.
 */
void ling_problem_free(struct LingProblem *problem);

/**
 * Closed-form ridge solution.
 *
 * # Safety
 * `problem` must be a live handle and `out` valid for one write.
 */
enum LingStatus ling_fit_exact(const struct LingProblem *problem,
                               double lambda,
                               struct LingFit **out);

/**
 * `n1` steps of exact-line-search gradient descent from zero.
 *
 * # Safety
 * `problem` must be a live handle and `out` valid for one write.
 */
enum LingStatus ling_fit_gd(const struct LingProblem *problem,
                            double lambda,
                            size_t n1,
                            struct LingFit **out);

/**
 * Principal component regression on a randomized top-`k1` basis.
 *
 * # Safety
 * `problem` must be a live handle and `out` valid for one write.
 */
enum LingStatus ling_fit_pcr(const struct LingProblem *problem,
                             size_t k1,
                             size_t power_iters,
                             uint64_t seed,
                             struct LingFit **out);

/**
 * Two-stage fit; the stored coefficients are the folded prediction vector.
 * A nonzero `shrink` enables stage-one shrinkage.
 *
 * # Safety
 * `problem` must be a live handle and `out` valid for one write.
 */
enum LingStatus ling_fit_ling(const struct LingProblem *problem,
                              double lambda,
                              size_t k2,
                              size_t n2,
                              size_t power_iters,
                              uint64_t seed,
                              int32_t shrink,
                              struct LingFit **out);

/**
 * SVRG for `passes` passes. A non-positive `step` is tuned on a held-out
 * fold first; the tuning cost is not charged.
 *
 * # Safety
 * `problem` must be a live handle and `out` valid for one write.
 */
enum LingStatus ling_fit_svrg(const struct LingProblem *problem,
                              double lambda,
                              size_t passes,
                              double step,
                              uint64_t seed,
                              struct LingFit **out);

/**
 * Number of coefficients, or 0 for a null handle.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
size_t ling_fit_num_coefficients(const struct LingFit *fit);

/**
 * Copies the coefficients into `out`, which holds `len` values.
 *
 * # Safety
 * `fit` must be a live handle and `out` valid for `len` writes.
 */
enum LingStatus ling_fit_coefficients(const struct LingFit *fit, double *out, size_t len);

/**
 * Total ledger FLOPs of the fit, or 0 for a null handle.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
uint64_t ling_fit_flops(const struct LingFit *fit);

/**
 * FLOPs charged to one phase (`"svd"`, `"stage2"`, ...), or 0.
 *
 * # Safety
 * `fit` must be null or a live handle; `phase` null or NUL-terminated.
 */
uint64_t ling_fit_phase_flops(const struct LingFit *fit, const char *phase);

/**
 * `out = X·β` for a `rows×p` row-major `x`.
 *
 * # Safety
 * `fit` must be a live handle, `x` valid for `rows*p` reads and `out` for
 * `rows` writes.
 */
enum LingStatus ling_fit_predict(const struct LingFit *fit,
                                 const double *x,
                                 size_t rows,
                                 size_t p,
                                 double *out);

/**
 * # Safety
 * `fit` must be null or a handle not yet freed.
 */
void ling_fit_free(struct LingFit *fit);

/**
 * Analytic fixed-design risks from a spectrum: the converged two-stage
 * estimator with shrinkage at rank `k2`, and ridge.
 *
 * `d` holds `len` descending singular values and `alpha` the true
 * coefficients in the right singular basis (also `len` values).
 *
 * # Safety
 * `d` and `alpha` must be valid for `len` reads; the outputs for one write.
 */
enum LingStatus ling_ridge_risk(const double *d,
                                const double *alpha,
                                size_t len,
                                double sigma,
                                size_t n,
                                double lambda,
                                size_t k2,
                                double *out_ling,
                                double *out_ridge);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LING_H */
