#ifndef GRAPHLEARN_H
#define GRAPHLEARN_H

/* Generated from src/lib.rs by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum GlStatus {
  GL_STATUS_OK = 0,
  /**
   * A required pointer was NULL.
   */
  GL_STATUS_NULL_POINTER = 1,
  /**
   * Parameters or data failed validation.
   */
  GL_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The solver hit its iteration limit; the estimate is still returned.
   */
  GL_STATUS_NOT_CONVERGED = 3,
  /**
   * A caller-provided buffer is too small.
   */
  GL_STATUS_BUFFER_TOO_SMALL = 4,
  /**
   * Internal failure (a Rust panic was caught).
   */
  GL_STATUS_PANIC = 5,
} GlStatus;

/**
 * How the similarity matrix passed to a solver was formed.
 */
typedef enum GlSimilarity {
  GL_SIMILARITY_COVARIANCE = 0,
  GL_SIMILARITY_CORRELATION = 1,
} GlSimilarity;

/**
 * Solver settings. Create with [`gl_config_new`].
 */
typedef struct GlConfig GlConfig;

/**
 * An estimated graph Laplacian plus its solve report.
 */
typedef struct GlLaplacian GlLaplacian;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gl_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next `gl_*` call on the same thread.
 */
const char *gl_last_error_message(void);

/**
 * Default solver settings.
 */
struct GlConfig *gl_config_new(void);

/**
 * # Safety
 * `cfg` must be NULL or a handle from [`gl_config_new`] not yet freed.
 */
void gl_config_free(struct GlConfig *cfg);

/**
 * Number of graph components.
 *
 * # Safety
 * `cfg` must be NULL or a live handle from [`gl_config_new`].
 */
enum GlStatus gl_config_set_k(struct GlConfig *cfg, size_t value);

/**
 * Rank-penalty weight of the k-component solver.
 *
 * # Safety
 * `cfg` must be NULL or a live handle from [`gl_config_new`].
 */
enum GlStatus gl_config_set_eta(struct GlConfig *cfg, double value);

/**
 * l1 weight of the MLE.
 *
 * # Safety
 * `cfg` must be NULL or a live handle from [`gl_config_new`].
 */
enum GlStatus gl_config_set_alpha(struct GlConfig *cfg, double value);

/**
 * Temporal-consistency weight.
 *
 * # Safety
 * `cfg` must be NULL or a live handle from [`gl_config_new`].
 */
enum GlStatus gl_config_set_delta(struct GlConfig *cfg, double value);

/**
 * Windows re-estimated jointly by the time-varying solver.
 *
 * # Safety
 * `cfg` must be NULL or a live handle from [`gl_config_new`].
 */
enum GlStatus gl_config_set_memory(struct GlConfig *cfg, size_t value);

/**
 * Seed for any randomized step.
 *
 * # Safety
 * `cfg` must be NULL or a live handle from [`gl_config_new`].
 */
enum GlStatus gl_config_set_seed(struct GlConfig *cfg, uint64_t value);

/**
 * Outer iteration limit.
 *
 * # Safety
 * `cfg` must be NULL or a live handle from [`gl_config_new`].
 */
enum GlStatus gl_config_set_max_outer_iters(struct GlConfig *cfg, size_t value);

/**
 * Inner (projected-gradient) iteration limit.
 *
 * # Safety
 * `cfg` must be NULL or a live handle from [`gl_config_new`].
 */
enum GlStatus gl_config_set_max_inner_iters(struct GlConfig *cfg, size_t value);

/**
 * Projected-gradient tolerance.
 *
 * # Safety
 * `cfg` must be NULL or a live handle from [`gl_config_new`].
 */
enum GlStatus gl_config_set_inner_tol(struct GlConfig *cfg, double value);

/**
 * Relative change tolerance between outer iterations.
 *
 * # Safety
 * `cfg` must be NULL or a live handle from [`gl_config_new`].
 */
enum GlStatus gl_config_set_outer_tol(struct GlConfig *cfg, double value);

/**
 * Connected graph by penalized maximum likelihood.
 *
 * # Safety
 * `s` must point to `p * p` doubles, `cfg` must be a live config handle
 * and `out` a writable pointer. On success or `NotConverged` `*out` holds a
 * new handle to release with [`gl_laplacian_free`].
 */
enum GlStatus gl_learn_mle(const double *s,
                           size_t p,
                           enum GlSimilarity kind,
                           const struct GlConfig *cfg,
                           struct GlLaplacian **out);

/**
 * k-component graph with unit degrees; `k` is taken from the config.
 *
 * # Safety
 * Same contract as [`gl_learn_mle`].
 */
enum GlStatus gl_learn_k_component(const double *s,
                                   size_t p,
                                   enum GlSimilarity kind,
                                   const struct GlConfig *cfg,
                                   struct GlLaplacian **out);

/**
 * Causal time-varying estimates for `t` windows.
 *
 * `s_seq` holds `t` consecutive `p * p` matrices and `counts` the number of
 * observations behind each. `out` must have room for `t` handles; every
 * slot is filled (or all are left NULL on error).
 *
 * # Safety
 * `s_seq` must point to `t * p * p` doubles, `counts` to `t` values and
 * `out` to `t` writable pointers.
 */
enum GlStatus gl_learn_time_varying(const double *s_seq,
                                    const size_t *counts,
                                    size_t t,
                                    size_t p,
                                    enum GlSimilarity kind,
                                    const struct GlConfig *cfg,
                                    struct GlLaplacian **out);

/**
 * Wraps a caller-supplied Laplacian (validated) so the spectral queries can
 * be used on it.
 *
 * # Safety
 * `data` must point to `p * p` doubles and `out` be writable.
 */
enum GlStatus gl_laplacian_from_dense(const double *data, size_t p, struct GlLaplacian **out);

/**
 * # Safety
 * `l` must be NULL or a live Laplacian handle.
 */
void gl_laplacian_free(struct GlLaplacian *l);

/**
 * Number of nodes, or 0 for NULL.
 *
 * # Safety
 * `l` must be NULL or a live Laplacian handle.
 */
size_t gl_laplacian_dim(const struct GlLaplacian *l);

/**
 * Copies the matrix row-major into `buf` (`len >= p * p`).
 *
 * # Safety
 * `l` must be a live handle and `buf` point to `len` writable doubles.
 */
enum GlStatus gl_laplacian_copy(const struct GlLaplacian *l, double *buf, size_t len);

/**
 * Spectral summary under the default zero tolerance. Any out-pointer may
 * be NULL.
 *
 * # Safety
 * `l` must be a live handle; non-NULL out-pointers must be writable.
 */
enum GlStatus gl_laplacian_spectrum(const struct GlLaplacian *l,
                                    double *algebraic_connectivity,
                                    double *spectral_radius,
                                    size_t *nullity);

/**
 * Log pseudo-determinant; `InvalidArgument` for a disconnected graph.
 *
 * # Safety
 * `l` must be a live handle and `out` writable.
 */
enum GlStatus gl_laplacian_log_gdet(const struct GlLaplacian *l, double *out);

/**
 * Solve statistics. Any out-pointer may be NULL. `objective` is NaN for
 * matrices not produced by a solver.
 *
 * # Safety
 * `l` must be a live handle; non-NULL out-pointers must be writable.
 */
enum GlStatus gl_laplacian_report(const struct GlLaplacian *l,
                                  bool *converged,
                                  size_t *iterations,
                                  double *objective);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPHLEARN_H */
