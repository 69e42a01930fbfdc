/* C interface for the system identification laboratory. */

#ifndef SYSID_LAB_H
#define SYSID_LAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/* Opaque handles. */
typedef struct ArxSystem ArxSystem;
typedef struct Trajectory Trajectory;

/**
 * Status code returned by every fallible call.
 */
typedef enum SysidStatus {
  SYSID_STATUS_OK = 0,
  SYSID_STATUS_NULL_POINTER = 1,
  SYSID_STATUS_INVALID_ARGUMENT = 2,
  SYSID_STATUS_NUMERIC_FAILURE = 3,
} SysidStatus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a scalar ARX system handle. `a` has `p` entries, `b` has `q`
 * entries. The handle must be released with `sysid_arx_free`.
 *
 * # Safety
 * `a`/`b` must point to arrays of the stated lengths; `out` must be a valid
 * writable pointer.
 */
enum SysidStatus sysid_arx_new(const double *a,
                               uintptr_t p,
                               const double *b,
                               uintptr_t q,
                               double sigma_w,
                               double sigma_u,
                               ArxSystem **out);

/**
 * Releases an ARX system handle; a null pointer is a no-op.
 *
 * # Safety
 * `sys` must have come from `sysid_arx_new` and not been freed before.
 */
void sysid_arx_free(ArxSystem *sys);

/**
 * Regressor dimension `p d_Y + q d_U` of the system.
 *
 * # Safety
 * Valid handle and writable `out`.
 */
enum SysidStatus sysid_arx_regressor_dim(const ArxSystem *sys, uintptr_t *out);

/**
 * Simulates a trajectory. `noise_family`: 0 gaussian, 1 rademacher,
 * 2 uniform. `restart_k = 0` means no restarting. The returned handle must be
 * released with `sysid_trajectory_free`.
 *
 * # Safety
 * Valid handle and writable `out`.
 */
enum SysidStatus sysid_arx_simulate(const ArxSystem *sys,
                                    uintptr_t horizon,
                                    uint64_t seed,
                                    uint32_t noise_family_code,
                                    uintptr_t restart_k,
                                    Trajectory **out);

/**
 * Releases a trajectory handle; a null pointer is a no-op.
 *
 * # Safety
 * `traj` must have come from `sysid_arx_simulate` and not been freed before.
 */
void sysid_trajectory_free(Trajectory *traj);

/**
 * Number of time steps in the trajectory.
 *
 * # Safety
 * Valid handle and writable `out`.
 */
enum SysidStatus sysid_trajectory_horizon(const Trajectory *traj, uintptr_t *out);

/**
 * Reads output coordinate `j` at time `t`.
 *
 * # Safety
 * Valid handle and writable `out`.
 */
enum SysidStatus sysid_trajectory_output(const Trajectory *traj,
                                         uintptr_t t,
                                         uintptr_t j,
                                         double *out);

/**
 * Ordinary least squares on the trajectory's lagged design. `theta_out` must
 * hold `d_Y * (p d_Y + q d_U)` entries and is filled row major.
 *
 * # Safety
 * Valid handles and buffers of the stated sizes.
 */
enum SysidStatus sysid_ols_fit(const Trajectory *traj,
                               uintptr_t p,
                               uintptr_t q,
                               double *theta_out,
                               uintptr_t theta_len,
                               uintptr_t *rank_out,
                               double *min_eig_out);

/**
 * Steady-state filtering Riccati solve for `(A, C, Sigma_W, Sigma_V)` given
 * row major. `f_out` holds `d_x * d_y` entries, `sigma_e_out` holds
 * `d_y * d_y`.
 *
 * # Safety
 * All matrix buffers must have the stated sizes.
 */
enum SysidStatus sysid_riccati_solve(const double *a,
                                     uintptr_t d_x,
                                     const double *c,
                                     uintptr_t d_y,
                                     const double *sigma_w,
                                     const double *sigma_v,
                                     double *f_out,
                                     double *sigma_e_out,
                                     double *residual_out);

/**
 * Gaussian tail `exp(-s^2 / (2 sigma2))`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SysidStatus sysid_gaussian_tail(double s, double sigma2, double *out);

/**
 * Two-regime quadratic-form tail bound (clamped to [0, 1]).
 *
 * # Safety
 * `out` must be writable.
 */
enum SysidStatus sysid_hw_tail(double s, double sigma2, double m_frob, double m_op, double *out);

/**
 * Sphere covering-number bound `(1 + 2/eps)^d`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SysidStatus sysid_covering_cardinality_bound(double eps, uintptr_t d, double *out);

/**
 * Squared operator-norm error bound for lagged least squares.
 *
 * # Safety
 * `out` must be writable.
 */
enum SysidStatus sysid_arx_error_bound(double snr_tau,
                                       uintptr_t t,
                                       uintptr_t dims,
                                       double delta,
                                       double logdet_cond,
                                       double c,
                                       double *out);

/**
 * Polynomial bound on non-explosive matrix powers.
 *
 * # Safety
 * `out` must be writable.
 */
enum SysidStatus sysid_power_norm_bound(uintptr_t k, uintptr_t d, double m, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYSID_LAB_H */
