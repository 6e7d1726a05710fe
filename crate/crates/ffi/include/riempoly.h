#ifndef RIEMPOLY_H
#define RIEMPOLY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum RpStatus {
  RP_STATUS_OK = 0,
  RP_STATUS_NULL_POINTER = 1,
  RP_STATUS_INVALID_ARGUMENT = 2,
  RP_STATUS_BUFFER_TOO_SMALL = 3,
  /**
   * An iterative geometric routine failed (log map, mean, drift, cut locus).
   */
  RP_STATUS_NUMERICAL = 4,
  /**
   * The requested quantity does not exist, e.g. R² of zero-variance data.
   */
  RP_STATUS_UNDEFINED = 5,
  RP_STATUS_IO = 6,
  RP_STATUS_PANIC = 7,
} RpStatus;

/**
 * Timed observations on a manifold.
 */
typedef struct RpDataset RpDataset;

/**
 * A fitted polynomial.
 */
typedef struct RpFit RpFit;

/**
 * Geometry handle.
 */
typedef struct RpManifold RpManifold;

/**
 * Optimizer settings for `rp_fit`; start from `rp_fit_options_default`.
 */
typedef struct RpFitOptions {
  /**
   * Integration steps per unit time.
   */
  size_t steps;
  size_t max_iters;
  /**
   * Convergence threshold on the gradient norm.
   */
  double tol;
  /**
   * Initial line-search step.
   */
  double step_size;
  /**
   * Nonzero selects conjugate gradient, zero steepest descent.
   */
  int32_t conjugate_gradient;
} RpFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *rp_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *rp_version(void);

/**
 * Flat space ℝ^dim.
 */
enum RpStatus rp_manifold_euclidean(size_t dim, struct RpManifold **out);

/**
 * Unit sphere S^n embedded in ℝ^(n+1).
 */
enum RpStatus rp_manifold_sphere(size_t n, struct RpManifold **out);

/**
 * SO(3) with the left-invariant metric given by a symmetric positive definite
 * 3×3 inertia matrix (row-major), or the bi-invariant metric when null.
 * Points are row-major rotation matrices; tangents are body angular velocities.
 */
enum RpStatus rp_manifold_so3(const double *inertia, struct RpManifold **out);

/**
 * Kendall shape space of `landmarks` points in `dim` dimensions.
 */
enum RpStatus rp_manifold_kendall(size_t landmarks, size_t dim, struct RpManifold **out);

/**
 * Number of coordinates of a point.
 */
size_t rp_manifold_point_dim(const struct RpManifold *manifold);

void rp_manifold_free(struct RpManifold *manifold);

/**
 * Builds a dataset from `n` observations: `times[i]` and the row-major
 * `points[i·point_dim .. (i+1)·point_dim]`. Kendall points are raw landmark
 * configurations (row-major landmarks × dim) and are centered and scaled
 * here; sphere and SO(3) points must already lie on the manifold.
 */
enum RpStatus rp_dataset_new(const struct RpManifold *manifold,
                             const double *times,
                             const double *points,
                             size_t n,
                             struct RpDataset **out);

size_t rp_dataset_len(const struct RpDataset *dataset);

void rp_dataset_free(struct RpDataset *dataset);

/**
 * Library defaults for `rp_fit`.
 */
struct RpFitOptions rp_fit_options_default(void);

/**
 * Fits an order-`order` polynomial, starting from the Fréchet mean.
 * `options` may be null for the defaults. A fit that stops without meeting
 * the tolerance still succeeds; check `rp_fit_converged`.
 */
enum RpStatus rp_fit(const struct RpManifold *manifold,
                     const struct RpDataset *dataset,
                     size_t order,
                     const struct RpFitOptions *options,
                     struct RpFit **out);

/**
 * Coefficient of determination; `RpStatus::Undefined` when the data have
 * zero variance.
 */
enum RpStatus rp_fit_r_squared(const struct RpFit *fit, double *out);

/**
 * Mean squared geodesic residual; NaN for a null fit.
 */
double rp_fit_sse(const struct RpFit *fit);

size_t rp_fit_iterations(const struct RpFit *fit);

/**
 * 1 when the gradient tolerance was met, 0 otherwise.
 */
int32_t rp_fit_converged(const struct RpFit *fit);

size_t rp_fit_order(const struct RpFit *fit);

/**
 * Copies the initial point into `gamma` (point_dim values) and the initial
 * velocities, in original time units, into `vels` (order × point_dim values,
 * row-major). Either buffer may be null when its length is zero.
 */
enum RpStatus rp_fit_params(const struct RpFit *fit,
                            double *gamma,
                            size_t gamma_len,
                            double *vels,
                            size_t vels_len);

/**
 * Evaluates the fitted curve at `n` times (original units, within the
 * observed range), writing n × point_dim values row-major into `out`.
 */
enum RpStatus rp_fit_sample(const struct RpFit *fit,
                            const double *times,
                            size_t n,
                            double *out,
                            size_t out_len);

void rp_fit_free(struct RpFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIEMPOLY_H */
