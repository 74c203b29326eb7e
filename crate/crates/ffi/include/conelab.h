#ifndef CONELAB_H
#define CONELAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum ConelabStatus {
  CONELAB_STATUS_OK = 0,
  CONELAB_STATUS_NULL_POINTER = 1,
  CONELAB_STATUS_INVALID_PARAMETER = 2,
  CONELAB_STATUS_DOMAIN_MEMBERSHIP = 3,
  CONELAB_STATUS_PRECONDITION = 4,
  CONELAB_STATUS_DIVERGENT = 5,
  CONELAB_STATUS_NUMERICAL_FAILURE = 6,
  CONELAB_STATUS_UNSUPPORTED = 7,
  CONELAB_STATUS_OTHER = 8,
  CONELAB_STATUS_PANIC = 9,
} ConelabStatus;

/**
 * Opaque exponent set for the weighted integral oracles.
 */
typedef struct ConelabIntegralParams ConelabIntegralParams;

/**
 * Opaque Dirichlet heat kernel of a wedge.
 */
typedef struct ConelabKernel ConelabKernel;

/**
 * Critical exponents of the Laplacian on a cone.
 */
typedef struct ConelabExponents {
  uintptr_t dimension;
  double eigenvalue;
  double lambda_plus;
  double lambda_minus;
} ConelabExponents;

/**
 * Open intervals of admissible weight exponents.
 */
typedef struct ConelabWindow {
  double theta_lo;
  double theta_hi;
  double big_theta_lo;
  double big_theta_hi;
} ConelabWindow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the last error message on this thread, without the
 * terminating nul. Zero when there is none.
 */
uintptr_t conelab_last_error_length(void);

/**
 * Copies the last error message into `buf` (nul-terminated, truncated to
 * `len - 1` bytes). Returns the number of bytes written before the nul.
 *
 * # Safety
 * `buf` must point to at least `len` writable bytes.
 */
uintptr_t conelab_last_error_message(char *buf, uintptr_t len);

/**
 * Library version as a static nul-terminated string.
 */
const char *conelab_version(void);

/**
 * Exponents of the planar wedge with opening `kappa` in `(0, 2 pi)`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum ConelabStatus conelab_wedge_exponents(double kappa, struct ConelabExponents *out);

/**
 * Exponents of the circular cone in three dimensions with polar half-angle
 * `alpha` in `(0, pi)`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum ConelabStatus conelab_cap_exponents(double alpha, struct ConelabExponents *out);

/**
 * Weight windows for the wedge with opening `kappa` and integrability `p`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum ConelabStatus conelab_wedge_window(double kappa, double p, struct ConelabWindow *out);

/**
 * Creates a heat kernel for the wedge with opening `kappa`.
 *
 * # Safety
 * `out` must be null or valid for writes. Release with
 * [`conelab_kernel_free`].
 */
enum ConelabStatus conelab_kernel_new(double kappa, struct ConelabKernel **out);

/**
 * Kernel value at time `t` between the polar points `(x_r, x_eta)` and
 * `(y_r, y_eta)`, angles measured from the bisector.
 *
 * # Safety
 * `kernel` must come from [`conelab_kernel_new`]; `out` must be null or
 * valid for writes.
 */
enum ConelabStatus conelab_kernel_eval(const struct ConelabKernel *kernel,
                                       double t,
                                       double x_r,
                                       double x_eta,
                                       double y_r,
                                       double y_eta,
                                       double *out);

/**
 * # Safety
 * `kernel` must be null or come from [`conelab_kernel_new`], and must not
 * be used afterwards.
 */
void conelab_kernel_free(struct ConelabKernel *kernel);

/**
 * # Safety
 * `out` must be null or valid for writes. Release with
 * [`conelab_integral_params_free`].
 */
enum ConelabStatus conelab_integral_params_new(double alpha,
                                               double beta,
                                               double gamma,
                                               double omega,
                                               double sigma,
                                               struct ConelabIntegralParams **out);

/**
 * Scaled one-dimensional time integral for `a >= b > 0`.
 *
 * # Safety
 * `params` must come from [`conelab_integral_params_new`]; `out` must be
 * null or valid for writes.
 */
enum ConelabStatus conelab_time_integral(const struct ConelabIntegralParams *params,
                                         double a,
                                         double b,
                                         double *out);

/**
 * Gaussian-weighted plane integral divided by its weight at `(x1, x2)`.
 *
 * # Safety
 * As for [`conelab_time_integral`].
 */
enum ConelabStatus conelab_plane_ratio(const struct ConelabIntegralParams *params,
                                       double x1,
                                       double x2,
                                       double *out);

/**
 * Boundary-weighted wedge integral divided by its weight at `(x1, x2)`.
 *
 * # Safety
 * As for [`conelab_time_integral`].
 */
enum ConelabStatus conelab_wedge_ratio(const struct ConelabIntegralParams *params,
                                       double kappa,
                                       double x1,
                                       double x2,
                                       double *out);

/**
 * # Safety
 * `params` must be null or come from [`conelab_integral_params_new`], and
 * must not be used afterwards.
 */
void conelab_integral_params_free(struct ConelabIntegralParams *params);

/**
 * Estimate ratio of the vertex-singular solution on the wedge, sampled on
 * the log-polar mesh at refinement `level` over `[0, 1]`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum ConelabStatus conelab_singular_estimate_ratio(double kappa,
                                                   double p,
                                                   double theta,
                                                   double big_theta,
                                                   uint32_t level,
                                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONELAB_H */
