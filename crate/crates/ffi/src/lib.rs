//! C ABI surface: opaque handles over the core types, status codes instead of
//! Rust errors, and scalar bound evaluators usable from any language with a C
//! FFI. The header is generated by the build script into `include/`.

use std::slice;

use sysid_lab::bounds;
use sysid_lab::error::LabError;
use sysid_lab::estimators::ols;
use sysid_lab::experiments::derive_stream;
use sysid_lab::numerics::{riccati_fixed_point, RICCATI_DEFAULT_MAX_ITER, RICCATI_DEFAULT_TOL};
use sysid_lab::systems::arx::ArxSystem;
use sysid_lab::systems::noise::{NoiseFamily, NoiseSpec};
use sysid_lab::systems::trajectory::{regressors, simulate_arx, Trajectory};

use nalgebra::DMatrix;

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SysidStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericFailure = 3,
}

fn status_of(err: &LabError) -> SysidStatus {
    match err {
        LabError::Singular(_) | LabError::Convergence { .. } | LabError::Numeric(_) => {
            SysidStatus::NumericFailure
        }
        _ => SysidStatus::InvalidArgument,
    }
}

unsafe fn slice_arg<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if len == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(slice::from_raw_parts(ptr, len))
    }
}

fn noise_family(code: u32) -> Option<NoiseSpec> {
    match code {
        0 => Some(NoiseSpec::new(NoiseFamily::Gaussian)),
        1 => Some(NoiseSpec::new(NoiseFamily::Rademacher)),
        2 => Some(NoiseSpec::new(NoiseFamily::Uniform)),
        _ => None,
    }
}

/// Creates a scalar ARX system handle. `a` has `p` entries, `b` has `q`
/// entries. The handle must be released with `sysid_arx_free`.
///
/// # Safety
/// `a`/`b` must point to arrays of the stated lengths; `out` must be a valid
/// writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sysid_arx_new(
    a: *const f64,
    p: usize,
    b: *const f64,
    q: usize,
    sigma_w: f64,
    sigma_u: f64,
    out: *mut *mut ArxSystem,
) -> SysidStatus {
    if out.is_null() {
        return SysidStatus::NullPointer;
    }
    let (Some(a), Some(b)) = (slice_arg(a, p), slice_arg(b, q)) else {
        return SysidStatus::NullPointer;
    };
    match ArxSystem::scalar(a, b, sigma_w, sigma_u) {
        Ok(sys) => {
            *out = Box::into_raw(Box::new(sys));
            SysidStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Releases an ARX system handle; a null pointer is a no-op.
///
/// # Safety
/// `sys` must have come from `sysid_arx_new` and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn sysid_arx_free(sys: *mut ArxSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Regressor dimension `p d_Y + q d_U` of the system.
///
/// # Safety
/// Valid handle and writable `out`.
#[no_mangle]
pub unsafe extern "C" fn sysid_arx_regressor_dim(
    sys: *const ArxSystem,
    out: *mut usize,
) -> SysidStatus {
    if sys.is_null() || out.is_null() {
        return SysidStatus::NullPointer;
    }
    *out = (*sys).regressor_dim();
    SysidStatus::Ok
}

/// Simulates a trajectory. `noise_family`: 0 gaussian, 1 rademacher,
/// 2 uniform. `restart_k = 0` means no restarting. The returned handle must be
/// released with `sysid_trajectory_free`.
///
/// # Safety
/// Valid handle and writable `out`.
#[no_mangle]
pub unsafe extern "C" fn sysid_arx_simulate(
    sys: *const ArxSystem,
    horizon: usize,
    seed: u64,
    noise_family_code: u32,
    restart_k: usize,
    out: *mut *mut Trajectory,
) -> SysidStatus {
    if sys.is_null() || out.is_null() {
        return SysidStatus::NullPointer;
    }
    let Some(noise) = noise_family(noise_family_code) else {
        return SysidStatus::InvalidArgument;
    };
    let restart = if restart_k == 0 { None } else { Some(restart_k) };
    let mut stream = derive_stream(seed, 0);
    match simulate_arx(&*sys, &noise, horizon, &mut stream, restart) {
        Ok(traj) => {
            *out = Box::into_raw(Box::new(traj));
            SysidStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Releases a trajectory handle; a null pointer is a no-op.
///
/// # Safety
/// `traj` must have come from `sysid_arx_simulate` and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn sysid_trajectory_free(traj: *mut Trajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of time steps in the trajectory.
///
/// # Safety
/// Valid handle and writable `out`.
#[no_mangle]
pub unsafe extern "C" fn sysid_trajectory_horizon(
    traj: *const Trajectory,
    out: *mut usize,
) -> SysidStatus {
    if traj.is_null() || out.is_null() {
        return SysidStatus::NullPointer;
    }
    *out = (*traj).horizon();
    SysidStatus::Ok
}

/// Reads output coordinate `j` at time `t`.
///
/// # Safety
/// Valid handle and writable `out`.
#[no_mangle]
pub unsafe extern "C" fn sysid_trajectory_output(
    traj: *const Trajectory,
    t: usize,
    j: usize,
    out: *mut f64,
) -> SysidStatus {
    if traj.is_null() || out.is_null() {
        return SysidStatus::NullPointer;
    }
    let traj = &*traj;
    if t >= traj.horizon() || j >= traj.d_y() {
        return SysidStatus::InvalidArgument;
    }
    *out = traj.y[(t, j)];
    SysidStatus::Ok
}

/// Ordinary least squares on the trajectory's lagged design. `theta_out` must
/// hold `d_Y * (p d_Y + q d_U)` entries and is filled row major.
///
/// # Safety
/// Valid handles and buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn sysid_ols_fit(
    traj: *const Trajectory,
    p: usize,
    q: usize,
    theta_out: *mut f64,
    theta_len: usize,
    rank_out: *mut usize,
    min_eig_out: *mut f64,
) -> SysidStatus {
    if traj.is_null() || theta_out.is_null() || rank_out.is_null() || min_eig_out.is_null() {
        return SysidStatus::NullPointer;
    }
    let traj = &*traj;
    let est = match regressors(traj, p, q).and_then(|(x, y)| ols(&x, &y)) {
        Ok(est) => est,
        Err(e) => return status_of(&e),
    };
    let needed = est.theta_hat.nrows() * est.theta_hat.ncols();
    if theta_len < needed {
        return SysidStatus::InvalidArgument;
    }
    let out = slice::from_raw_parts_mut(theta_out, needed);
    for (idx, value) in est.theta_hat.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).enumerate() {
        out[idx] = value;
    }
    *rank_out = est.rank;
    *min_eig_out = est.min_eig;
    SysidStatus::Ok
}

/// Steady-state filtering Riccati solve for `(A, C, Sigma_W, Sigma_V)` given
/// row major. `f_out` holds `d_x * d_y` entries, `sigma_e_out` holds
/// `d_y * d_y`.
///
/// # Safety
/// All matrix buffers must have the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn sysid_riccati_solve(
    a: *const f64,
    d_x: usize,
    c: *const f64,
    d_y: usize,
    sigma_w: *const f64,
    sigma_v: *const f64,
    f_out: *mut f64,
    sigma_e_out: *mut f64,
    residual_out: *mut f64,
) -> SysidStatus {
    let (Some(a), Some(c), Some(sw), Some(sv)) = (
        slice_arg(a, d_x * d_x),
        slice_arg(c, d_y * d_x),
        slice_arg(sigma_w, d_x * d_x),
        slice_arg(sigma_v, d_y * d_y),
    ) else {
        return SysidStatus::NullPointer;
    };
    if f_out.is_null() || sigma_e_out.is_null() || residual_out.is_null() {
        return SysidStatus::NullPointer;
    }
    let a = DMatrix::from_row_slice(d_x, d_x, a);
    let c = DMatrix::from_row_slice(d_y, d_x, c);
    let sw = DMatrix::from_row_slice(d_x, d_x, sw);
    let sv = DMatrix::from_row_slice(d_y, d_y, sv);
    let sol = match riccati_fixed_point(&a, &c, &sw, &sv, RICCATI_DEFAULT_TOL, RICCATI_DEFAULT_MAX_ITER)
    {
        Ok(sol) => sol,
        Err(e) => return status_of(&e),
    };
    let f_buf = slice::from_raw_parts_mut(f_out, d_x * d_y);
    for (idx, value) in sol.f_star.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).enumerate() {
        f_buf[idx] = value;
    }
    let se_buf = slice::from_raw_parts_mut(sigma_e_out, d_y * d_y);
    for (idx, value) in sol.sigma_e.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).enumerate() {
        se_buf[idx] = value;
    }
    *residual_out = sol.residual;
    SysidStatus::Ok
}

fn scalar_out(out: *mut f64, result: Result<f64, LabError>) -> SysidStatus {
    if out.is_null() {
        return SysidStatus::NullPointer;
    }
    match result {
        Ok(v) => {
            unsafe { *out = v };
            SysidStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Gaussian tail `exp(-s^2 / (2 sigma2))`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysid_gaussian_tail(s: f64, sigma2: f64, out: *mut f64) -> SysidStatus {
    scalar_out(out, bounds::gaussian_tail(s, sigma2).map(|r| r.value))
}

/// Two-regime quadratic-form tail bound (clamped to [0, 1]).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysid_hw_tail(
    s: f64,
    sigma2: f64,
    m_frob: f64,
    m_op: f64,
    out: *mut f64,
) -> SysidStatus {
    scalar_out(out, bounds::hw_tail(s, sigma2, m_frob, m_op).map(|r| r.value))
}

/// Sphere covering-number bound `(1 + 2/eps)^d`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysid_covering_cardinality_bound(
    eps: f64,
    d: usize,
    out: *mut f64,
) -> SysidStatus {
    scalar_out(out, bounds::covering_cardinality_bound(eps, d).map(|r| r.value))
}

/// Squared operator-norm error bound for lagged least squares.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysid_arx_error_bound(
    snr_tau: f64,
    t: usize,
    dims: usize,
    delta: f64,
    logdet_cond: f64,
    c: f64,
    out: *mut f64,
) -> SysidStatus {
    scalar_out(
        out,
        bounds::arx_error_bound(snr_tau, t, dims, delta, logdet_cond, c).map(|r| r.value),
    )
}

/// Polynomial bound on non-explosive matrix powers.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysid_power_norm_bound(
    k: usize,
    d: usize,
    m: f64,
    out: *mut f64,
) -> SysidStatus {
    scalar_out(out, bounds::power_norm_bound(k, d, m).map(|r| r.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn arx_lifecycle_and_ols_round_trip() {
        unsafe {
            let mut sys: *mut ArxSystem = ptr::null_mut();
            let a = [0.6f64];
            let status = sysid_arx_new(a.as_ptr(), 1, ptr::null(), 0, 1.0, 0.0, &mut sys);
            assert_eq!(status, SysidStatus::Ok);

            let mut dim = 0usize;
            assert_eq!(sysid_arx_regressor_dim(sys, &mut dim), SysidStatus::Ok);
            assert_eq!(dim, 1);

            let mut traj: *mut Trajectory = ptr::null_mut();
            assert_eq!(
                sysid_arx_simulate(sys, 512, 7, 0, 0, &mut traj),
                SysidStatus::Ok
            );
            let mut horizon = 0usize;
            assert_eq!(sysid_trajectory_horizon(traj, &mut horizon), SysidStatus::Ok);
            assert_eq!(horizon, 512);

            let mut theta = [0.0f64];
            let mut rank = 0usize;
            let mut min_eig = 0.0f64;
            assert_eq!(
                sysid_ols_fit(traj, 1, 0, theta.as_mut_ptr(), 1, &mut rank, &mut min_eig),
                SysidStatus::Ok
            );
            assert!((theta[0] - 0.6).abs() < 0.2, "theta {}", theta[0]);
            assert_eq!(rank, 1);
            assert!(min_eig > 0.0);

            sysid_trajectory_free(traj);
            sysid_arx_free(sys);
        }
    }

    #[test]
    fn explosive_system_rejected() {
        unsafe {
            let mut sys: *mut ArxSystem = ptr::null_mut();
            let a = [1.5f64];
            let status = sysid_arx_new(a.as_ptr(), 1, ptr::null(), 0, 1.0, 0.0, &mut sys);
            assert_eq!(status, SysidStatus::InvalidArgument);
            assert!(sys.is_null());
        }
    }

    #[test]
    fn null_pointers_reported() {
        unsafe {
            let mut out = 0.0f64;
            assert_eq!(
                sysid_trajectory_output(ptr::null(), 0, 0, &mut out),
                SysidStatus::NullPointer
            );
            assert_eq!(
                sysid_gaussian_tail(1.0, 1.0, ptr::null_mut()),
                SysidStatus::NullPointer
            );
        }
    }

    #[test]
    fn scalar_bounds_match_core_values() {
        unsafe {
            let mut v = 0.0f64;
            assert_eq!(sysid_covering_cardinality_bound(2.0, 3, &mut v), SysidStatus::Ok);
            assert_eq!(v, 8.0);
            assert_eq!(sysid_hw_tail(0.0, 1.0, 1.0, 1.0, &mut v), SysidStatus::Ok);
            assert_eq!(v, 1.0);
            assert_eq!(sysid_gaussian_tail(0.0, -1.0, &mut v), SysidStatus::InvalidArgument);
        }
    }

    #[test]
    fn riccati_scalar_case() {
        unsafe {
            let a = [0.9f64];
            let c = [1.0f64];
            let sw = [1.0f64];
            let sv = [1.0f64];
            let mut f = [0.0f64];
            let mut se = [0.0f64];
            let mut residual = 1.0f64;
            let status = sysid_riccati_solve(
                a.as_ptr(),
                1,
                c.as_ptr(),
                1,
                sw.as_ptr(),
                sv.as_ptr(),
                f.as_mut_ptr(),
                se.as_mut_ptr(),
                &mut residual,
            );
            assert_eq!(status, SysidStatus::Ok);
            assert!(residual < 1e-10);
            assert!(se[0] > 1.0);
            assert!(f[0] > 0.0 && f[0] < 0.9);
        }
    }

    #[test]
    fn simulation_deterministic_across_handles() {
        unsafe {
            let mut sys: *mut ArxSystem = ptr::null_mut();
            let a = [0.5f64];
            sysid_arx_new(a.as_ptr(), 1, ptr::null(), 0, 1.0, 0.0, &mut sys);
            let mut t1: *mut Trajectory = ptr::null_mut();
            let mut t2: *mut Trajectory = ptr::null_mut();
            sysid_arx_simulate(sys, 32, 5, 0, 0, &mut t1);
            sysid_arx_simulate(sys, 32, 5, 0, 0, &mut t2);
            for t in 0..32 {
                let (mut x1, mut x2) = (0.0, 0.0);
                sysid_trajectory_output(t1, t, 0, &mut x1);
                sysid_trajectory_output(t2, t, 0, &mut x2);
                assert_eq!(x1.to_bits(), x2.to_bits());
            }
            sysid_trajectory_free(t1);
            sysid_trajectory_free(t2);
            sysid_arx_free(sys);
        }
    }
}
