#ifndef VAREXP_H
#define VAREXP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VarexpStatus {
  VAREXP_STATUS_OK = 0,
  VAREXP_STATUS_DOMAIN = 1,
  VAREXP_STATUS_SOLVER = 2,
  VAREXP_STATUS_QUADRATURE = 3,
  VAREXP_STATUS_INAPPLICABLE = 4,
  VAREXP_STATUS_EPSILON_ZERO = 5,
  VAREXP_STATUS_DEGENERATE = 6,
  VAREXP_STATUS_NULL_POINTER = 7,
  VAREXP_STATUS_PANIC = 8,
} VarexpStatus;

// Method tag of a [`VarexpCutoff`].
typedef enum VarexpCutoffKind {
  VAREXP_CUTOFF_KIND_AFFINE = 0,
  VAREXP_CUTOFF_KIND_TRUNCATED = 1,
  VAREXP_CUTOFF_KIND_GENERAL = 2,
  VAREXP_CUTOFF_KIND_GENERAL_LOWER_BOUND = 3,
  VAREXP_CUTOFF_KIND_KL_EXACT = 4,
} VarexpCutoffKind;

// Opaque point estimator.
typedef struct VarexpEstimator VarexpEstimator;

// Opaque observation model.
typedef struct VarexpModel VarexpModel;

typedef struct VarexpCutoff {
  double c_star;
  double c2_star;
  double bracket_lo;
  double bracket_hi;
  double residual;
  enum VarexpCutoffKind method;
} VarexpCutoff;

typedef struct VarexpRiskEstimate {
  double mean;
  double stderr;
  uint64_t n;
  uint64_t seed;
} VarexpRiskEstimate;

typedef struct VarexpEpsilon {
  double value;
  double stderr_at_min;
  // `‖θ‖` of the minimizing grid point.
  double arg_theta_norm;
  double tail_value;
} VarexpEpsilon;

typedef struct VarexpEmpiricalCutoff {
  double k_star;
  bool capped;
  double argmax_theta_norm;
  uint64_t evaluations;
} VarexpEmpiricalCutoff;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or an empty string.
// The pointer stays valid until the next call into this library on the
// same thread.
const char *varexp_last_error(void);

// Library version as a static NUL-terminated string.
const char *varexp_version(void);

// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum VarexpStatus varexp_model_new(size_t d,
                                   double sigma_x2,
                                   double sigma_y2,
                                   struct VarexpModel **out);

// # Safety
// `model` must be null or a handle from [`varexp_model_new`] not yet freed.
void varexp_model_free(struct VarexpModel *model);

// Parses an estimator name such as `identity`, `affine:0.75`, `truncated`,
// `js` or `jsplus`.
//
// # Safety
// `spec` must be a NUL-terminated string and `out` writable.
enum VarexpStatus varexp_estimator_parse(const char *spec, struct VarexpEstimator **out);

// Wraps a host callback as an estimator. `equivariant` declares
// `θ̂(Qx) = Qθ̂(x)` for orthogonal `Q`, which permits radial search grids;
// otherwise pass explicit grids.
//
// # Safety
// `callback` must be callable concurrently from multiple threads with
// `user_data`, and `user_data` must outlive the returned handle. `name` may
// be null.
enum VarexpStatus varexp_estimator_custom(const char *name,
                                          bool equivariant,
                                          void (*callback)(const double *x,
                                                           double *out,
                                                           size_t d,
                                                           void *user_data),
                                          void *user_data,
                                          struct VarexpEstimator **out);

// # Safety
// `est` must be null or a live estimator handle.
void varexp_estimator_free(struct VarexpEstimator *est);

// `h_α(z)`.
//
// # Safety
// `out` must be writable.
enum VarexpStatus varexp_h_alpha(double z, double alpha, double *out);

// Loss of `N_d(θ̂, c²σ_Y² I)` for the density of `N_d(θ, σ_Y² I)`;
// `alpha = -1` gives Kullback-Leibler.
//
// # Safety
// `theta_hat` and `theta` must point to `d` doubles, `d` being the model
// dimension.
enum VarexpStatus varexp_loss(const struct VarexpModel *model,
                              const double *theta_hat,
                              const double *theta,
                              double c,
                              double alpha,
                              double *out);

// # Safety
// `model` must be a live handle and `out` writable.
enum VarexpStatus varexp_risk_identity(const struct VarexpModel *model,
                                       double c,
                                       double alpha,
                                       double *out);

// Risk of `N_d(X, σ_Y² I)` relative to the best expansion of `X`.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum VarexpStatus varexp_risk_ratio_identity(const struct VarexpModel *model,
                                             double alpha,
                                             double *out);

// # Safety
// `model` must be a live handle and `out` writable.
enum VarexpStatus varexp_risk_affine(const struct VarexpModel *model,
                                     double a,
                                     double norm_theta,
                                     double c,
                                     double alpha,
                                     double *out);

// Risk of `max(X, 0)` in one dimension.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum VarexpStatus varexp_risk_truncated(const struct VarexpModel *model,
                                        double theta,
                                        double c,
                                        double alpha,
                                        double *out);

// # Safety
// `out` must be writable.
enum VarexpStatus varexp_cutoff_affine(double a, double r, double alpha, struct VarexpCutoff *out);

// # Safety
// `out` must be writable.
enum VarexpStatus varexp_cutoff_truncated(double r, double alpha, struct VarexpCutoff *out);

// # Safety
// `out` must be writable.
enum VarexpStatus varexp_cutoff_general(size_t d,
                                        double alpha,
                                        double epsilon,
                                        struct VarexpCutoff *out);

// # Safety
// `out` must be writable.
enum VarexpStatus varexp_cutoff_general_lower_bound(size_t d,
                                                    double alpha,
                                                    double b0,
                                                    double b1,
                                                    double b2,
                                                    struct VarexpCutoff *out);

// # Safety
// `out` must be writable.
enum VarexpStatus varexp_cutoff_kl_exact(double r_bar, struct VarexpCutoff *out);

// Monte Carlo risk at `theta` (length `d`).
//
// # Safety
// Handles must be live, `theta` must point to `d` doubles and `out` be
// writable.
enum VarexpStatus varexp_mc_risk(const struct VarexpModel *model,
                                 const struct VarexpEstimator *est,
                                 double c,
                                 double alpha,
                                 const double *theta,
                                 size_t n,
                                 uint64_t seed,
                                 struct VarexpRiskEstimate *out);

// `ε` over `ℝ^d`, searched radially on `‖θ‖ ∈ [0, max_radius]` with
// `points` initial grid points. Needs an orthogonally equivariant estimator
// when `d > 1`.
//
// # Safety
// Handles must be live and `out` writable.
enum VarexpStatus varexp_mc_epsilon(const struct VarexpModel *model,
                                    const struct VarexpEstimator *est,
                                    double alpha,
                                    double max_radius,
                                    size_t points,
                                    size_t n,
                                    uint64_t seed,
                                    struct VarexpEpsilon *out);

// `ε` over an explicit grid of `npoints` points stored row-major.
//
// # Safety
// Handles must be live, `grid` must hold `npoints * d` doubles and `out`
// be writable.
enum VarexpStatus varexp_mc_epsilon_grid(const struct VarexpModel *model,
                                         const struct VarexpEstimator *est,
                                         double alpha,
                                         const double *grid,
                                         size_t npoints,
                                         size_t n,
                                         uint64_t seed,
                                         struct VarexpEpsilon *out);

// Empirical threshold in `c²` over an explicit grid of `npoints` points
// stored row-major. `cap <= 0` selects the default cap.
//
// # Safety
// Handles must be live, `grid` must hold `npoints * d` doubles and `out`
// be writable.
enum VarexpStatus varexp_empirical_cutoff(const struct VarexpModel *model,
                                          const struct VarexpEstimator *est,
                                          double alpha,
                                          const double *grid,
                                          size_t npoints,
                                          size_t n,
                                          double cap,
                                          uint64_t seed,
                                          struct VarexpEmpiricalCutoff *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VAREXP_H */
