//! Dense-matrix utilities shared by every other module: symmetric eigen
//! extremes, SVD pseudo-inverse, log-determinant, finite Gramian sums and the
//! discrete Riccati fixed point.
//!
//! All functions are pure and reject non-finite inputs.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{LabError, Result};

/// Relative tolerance used when deciding whether a matrix counts as symmetric.
pub const SYMMETRY_RTOL: f64 = 1e-10;

/// Solution of the discrete algebraic Riccati equation together with the
/// derived Kalman predictor gain and innovation covariance.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    /// Fixed point of the Riccati operator (symmetric PSD).
    pub p_star: DMatrix<f64>,
    /// Kalman predictor gain, `A P* C^T (C P* C^T + Sigma_V)^-1`.
    pub f_star: DMatrix<f64>,
    /// Innovation covariance, `C P* C^T + Sigma_V` (symmetric PD).
    pub sigma_e: DMatrix<f64>,
    /// Operator norm of `P* - RIC(P*)` at termination.
    pub residual: f64,
    /// Number of fixed-point iterations performed.
    pub iterations: usize,
}

pub(crate) fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(LabError::Numeric(format!("{what} contains NaN or Inf")))
    }
}

fn check_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() == m.ncols() {
        Ok(())
    } else {
        Err(LabError::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// `(M + M^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let scale = m.norm().max(1.0);
    let skew = (m - m.transpose()).norm();
    if skew <= SYMMETRY_RTOL * scale {
        Ok(())
    } else {
        Err(LabError::Contract(format!(
            "{what} is not symmetric: relative skew {:e} exceeds {SYMMETRY_RTOL:e}",
            skew / scale
        )))
    }
}

/// Smallest and largest eigenvalue of a symmetric matrix.
///
/// The input is symmetrized before the eigendecomposition to suppress
/// round-off drift; asymmetry beyond [`SYMMETRY_RTOL`] is rejected.
pub fn sym_eig_extremes(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_finite(m, "matrix")?;
    check_square(m, "matrix")?;
    check_symmetric(m, "matrix")?;
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &lambda in eig.eigenvalues.iter() {
        lo = lo.min(lambda);
        hi = hi.max(lambda);
    }
    Ok((lo, hi))
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Moore-Penrose pseudo-inverse via SVD, together with the numerical rank.
///
/// Singular values `<= tol` are zeroed. When `tol` is `None` the cutoff is
/// `max(rows, cols) * machine_eps * sigma_1`.
pub fn pinv_with_rank(m: &DMatrix<f64>, tol: Option<f64>) -> Result<(DMatrix<f64>, usize)> {
    check_finite(m, "matrix")?;
    if let Some(t) = tol {
        if t < 0.0 {
            return Err(LabError::Contract(format!("pinv tolerance must be >= 0, got {t}")));
        }
    }
    let (rows, cols) = m.shape();
    let svd = m.clone().svd(true, true);
    let sigma1 = svd.singular_values.max();
    let cutoff = tol.unwrap_or(rows.max(cols) as f64 * f64::EPSILON * sigma1);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let mut rank = 0;
    let mut inv_s = DMatrix::zeros(v_t.nrows(), u.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            inv_s[(i, i)] = 1.0 / s;
            rank += 1;
        }
    }
    Ok((v_t.transpose() * inv_s * u.transpose(), rank))
}

/// Moore-Penrose pseudo-inverse via SVD (see [`pinv_with_rank`]).
pub fn pinv(m: &DMatrix<f64>, tol: Option<f64>) -> Result<DMatrix<f64>> {
    pinv_with_rank(m, tol).map(|(p, _)| p)
}

/// Log-determinant of a symmetric positive definite matrix via Cholesky.
///
/// A singular or indefinite input is an error, never a `-inf` value.
pub fn logdet_psd(m: &DMatrix<f64>) -> Result<f64> {
    check_finite(m, "matrix")?;
    check_square(m, "matrix")?;
    check_symmetric(m, "matrix")?;
    let chol = symmetrize(m)
        .cholesky()
        .ok_or_else(|| LabError::Singular("logdet requires lambda_min > 0".into()))?;
    let mut acc = 0.0;
    let l = chol.l();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if d <= 0.0 {
            return Err(LabError::Singular("logdet requires lambda_min > 0".into()));
        }
        acc += d.ln();
    }
    Ok(2.0 * acc)
}

/// Finite double Gramian sum `sum_{t=1}^{T} sum_{k=0}^{t-1} A^k Q (A^T)^k`,
/// computed by the recursion `S_{t+1} = A S_t A^T + Q` with a running total.
pub fn gramian_sum(a: &DMatrix<f64>, q: &DMatrix<f64>, horizon: usize) -> Result<DMatrix<f64>> {
    check_finite(a, "A")?;
    check_finite(q, "Q")?;
    check_square(a, "A")?;
    if a.shape() != q.shape() {
        return Err(LabError::Dimension(format!(
            "Q must be {}x{} to conform with A, got {}x{}",
            a.nrows(),
            a.nrows(),
            q.nrows(),
            q.ncols()
        )));
    }
    if horizon == 0 {
        return Err(LabError::Contract("gramian_sum requires T >= 1".into()));
    }
    let mut partial = q.clone();
    let mut total = q.clone();
    for _ in 1..horizon {
        partial = a * &partial * a.transpose() + q;
        total += &partial;
    }
    Ok(total)
}

/// Stationary solution of `X = A X A^T + Q` by the doubling (Smith) iteration.
///
/// Requires `rho(A) < 1`; divergence surfaces as a convergence error.
pub fn dlyap(a: &DMatrix<f64>, q: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<DMatrix<f64>> {
    check_square(a, "A")?;
    let mut x = q.clone();
    let mut pow = a.clone();
    for it in 0..max_iter {
        let step = &pow * &x * pow.transpose();
        let delta = operator_norm(&step);
        x += step;
        if !delta.is_finite() {
            return Err(LabError::Numeric("dlyap iteration diverged".into()));
        }
        if delta <= tol {
            return Ok(symmetrize(&x));
        }
        pow = &pow * &pow;
        if it == max_iter - 1 {
            return Err(LabError::Convergence { residual: delta, iterations: it + 1 });
        }
    }
    Ok(symmetrize(&x))
}

fn riccati_step(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    sigma_w: &DMatrix<f64>,
    sigma_v: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let innov = symmetrize(&(c * p * c.transpose() + sigma_v));
    let chol = innov
        .cholesky()
        .ok_or_else(|| LabError::Singular("C P C^T + Sigma_V must stay positive definite".into()))?;
    let apc = a * p * c.transpose();
    // A P A^T + Sigma_W - (A P C^T) (C P C^T + Sigma_V)^-1 (C P A^T)
    let correction = &apc * chol.solve(&apc.transpose());
    Ok(symmetrize(&(a * p * a.transpose() + sigma_w - correction)))
}

/// Fixed point of the discrete Riccati operator, iterated from `P_0 = Sigma_W`
/// until the operator-norm residual drops below `tol`.
pub fn riccati_fixed_point(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    sigma_w: &DMatrix<f64>,
    sigma_v: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<RiccatiSolution> {
    check_finite(a, "A")?;
    check_finite(c, "C")?;
    check_square(a, "A")?;
    check_symmetric(sigma_w, "Sigma_W")?;
    check_symmetric(sigma_v, "Sigma_V")?;
    if c.ncols() != a.nrows() {
        return Err(LabError::Dimension(format!(
            "C has {} columns but A is {}x{}",
            c.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    let mut p = symmetrize(sigma_w);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for it in 1..=max_iter {
        let next = riccati_step(a, c, sigma_w, sigma_v, &p)?;
        residual = operator_norm(&(&next - &p));
        p = next;
        iterations = it;
        if residual <= tol {
            break;
        }
    }
    if residual > tol {
        return Err(LabError::Convergence { residual, iterations });
    }
    let innov = symmetrize(&(c * &p * c.transpose() + sigma_v));
    let chol = innov
        .clone()
        .cholesky()
        .ok_or_else(|| LabError::Singular("innovation covariance is not positive definite".into()))?;
    let f_star = a * &p * c.transpose() * chol.inverse();
    Ok(RiccatiSolution { p_star: p, f_star, sigma_e: innov, residual, iterations })
}

/// Default tolerances of the Riccati solver.
pub const RICCATI_DEFAULT_TOL: f64 = 1e-12;
pub const RICCATI_DEFAULT_MAX_ITER: usize = 100_000;

/// Symmetric square root of a PSD matrix via eigendecomposition.
/// Eigenvalues in `[-slack, 0)` are clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_finite(m, "matrix")?;
    check_square(m, "matrix")?;
    check_symmetric(m, "matrix")?;
    let eig = SymmetricEigen::new(symmetrize(m));
    let scale = eig.eigenvalues.amax().max(1.0);
    let mut d = DMatrix::zeros(m.nrows(), m.nrows());
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -1e-12 * scale {
            return Err(LabError::Contract(format!(
                "matrix is not PSD: eigenvalue {lambda:e}"
            )));
        }
        d[(i, i)] = lambda.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eig_extremes_identity() {
        let m = DMatrix::identity(3, 3);
        let (lo, hi) = sym_eig_extremes(&m).unwrap();
        assert_relative_eq!(lo, 1.0, max_relative = 1e-12);
        assert_relative_eq!(hi, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn eig_extremes_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 5.0]);
        let (lo, hi) = sym_eig_extremes(&m).unwrap();
        assert_relative_eq!(lo, 2.0, max_relative = 1e-12);
        assert_relative_eq!(hi, 5.0, max_relative = 1e-12);
    }

    #[test]
    fn eig_extremes_hand_characteristic_polynomial() {
        // [[2,1],[1,2]]: det(M - x I) = (2-x)^2 - 1, roots 1 and 3.
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (lo, hi) = sym_eig_extremes(&m).unwrap();
        assert_relative_eq!(lo, 1.0, max_relative = 1e-12);
        assert_relative_eq!(hi, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn eig_extremes_rejects_nonsquare_and_asymmetric() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0; 6]);
        assert!(matches!(sym_eig_extremes(&m), Err(LabError::Dimension(_))));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eig_extremes(&m), Err(LabError::Contract(_))));
    }

    #[test]
    fn pinv_rank_deficient_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let (p, rank) = pinv_with_rank(&m, None).unwrap();
        assert_eq!(rank, 1);
        assert_relative_eq!(p[(0, 0)], 0.5, max_relative = 1e-12);
        assert_relative_eq!(p[(1, 1)], 0.0, max_relative = 1e-12);
    }

    #[test]
    fn pinv_identity() {
        let m = DMatrix::identity(3, 3);
        let p = pinv(&m, None).unwrap();
        assert_relative_eq!((p - m).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pinv_tall_matrix_by_hand() {
        // M = [1; 2]: (M^T M)^-1 M^T = [0.2, 0.4].
        let m = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let p = pinv(&m, None).unwrap();
        assert_eq!(p.shape(), (1, 2));
        assert_relative_eq!(p[(0, 0)], 0.2, max_relative = 1e-12);
        assert_relative_eq!(p[(0, 1)], 0.4, max_relative = 1e-12);
    }

    #[test]
    fn logdet_cases() {
        assert_relative_eq!(logdet_psd(&DMatrix::identity(4, 4)).unwrap(), 0.0, epsilon = 1e-12);
        let e = std::f64::consts::E;
        let m = DMatrix::from_row_slice(2, 2, &[e, 0.0, 0.0, e]);
        assert_relative_eq!(logdet_psd(&m).unwrap(), 2.0, max_relative = 1e-12);
        // det [[2,1],[1,2]] = 3 by hand.
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_relative_eq!(logdet_psd(&m).unwrap(), 3.0f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn logdet_singular_is_error() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(logdet_psd(&m), Err(LabError::Singular(_))));
    }

    #[test]
    fn gramian_sum_nilpotent() {
        let a = DMatrix::zeros(2, 2);
        let q = DMatrix::identity(2, 2);
        let g = gramian_sum(&a, &q, 3).unwrap();
        assert_relative_eq!((g - DMatrix::identity(2, 2) * 3.0).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gramian_sum_scalar_by_hand() {
        // a = 0.5, q = 1, T = 2: (1) + (1 + 0.25) = 2.25 from expanding the double sum.
        let a = DMatrix::from_element(1, 1, 0.5);
        let q = DMatrix::from_element(1, 1, 1.0);
        let g = gramian_sum(&a, &q, 2).unwrap();
        assert_relative_eq!(g[(0, 0)], 2.25, max_relative = 1e-14);
    }

    #[test]
    fn gramian_sum_identity_dynamics() {
        let a = DMatrix::identity(3, 3);
        let q = DMatrix::identity(3, 3);
        let g = gramian_sum(&a, &q, 3).unwrap();
        assert_relative_eq!((g - DMatrix::identity(3, 3) * 6.0).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn riccati_zero_dynamics() {
        let a = DMatrix::zeros(2, 2);
        let c = DMatrix::identity(2, 2);
        let sigma_w = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let sigma_v = DMatrix::identity(2, 2);
        let sol =
            riccati_fixed_point(&a, &c, &sigma_w, &sigma_v, RICCATI_DEFAULT_TOL, 100).unwrap();
        assert_relative_eq!((&sol.p_star - &sigma_w).norm(), 0.0, epsilon = 1e-10);
        assert_relative_eq!(sol.f_star.norm(), 0.0, epsilon = 1e-10);
        assert_relative_eq!((&sol.sigma_e - (&sigma_w + &sigma_v)).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn riccati_zero_process_noise() {
        let a = DMatrix::from_element(1, 1, 0.5);
        let c = DMatrix::from_element(1, 1, 1.0);
        let sigma_w = DMatrix::zeros(1, 1);
        let sigma_v = DMatrix::identity(1, 1);
        let sol =
            riccati_fixed_point(&a, &c, &sigma_w, &sigma_v, RICCATI_DEFAULT_TOL, 10_000).unwrap();
        assert_relative_eq!(sol.p_star[(0, 0)], 0.0, epsilon = 1e-10);
        assert_relative_eq!(sol.f_star[(0, 0)], 0.0, epsilon = 1e-10);
        assert_relative_eq!(sol.sigma_e[(0, 0)], 1.0, max_relative = 1e-10);
    }

    #[test]
    fn riccati_scalar_against_quadratic_root() {
        // scalar fixed point of p = 0.81 p + 1 - 0.81 p^2/(p+1), located by an
        // independent bisection rather than the solver under test
        let oracle = {
            let g = |p: f64| 0.81 * p + 1.0 - 0.81 * p * p / (p + 1.0) - p;
            let (mut lo, mut hi) = (0.0f64, 100.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let a = DMatrix::from_element(1, 1, 0.9);
        let c = DMatrix::from_element(1, 1, 1.0);
        let sigma_w = DMatrix::identity(1, 1);
        let sigma_v = DMatrix::identity(1, 1);
        let sol =
            riccati_fixed_point(&a, &c, &sigma_w, &sigma_v, RICCATI_DEFAULT_TOL, 100_000).unwrap();
        assert_relative_eq!(sol.p_star[(0, 0)], oracle, max_relative = 1e-9);
    }

    #[test]
    fn riccati_nonconvergence_reports_residual() {
        let a = DMatrix::from_element(1, 1, 0.9);
        let c = DMatrix::from_element(1, 1, 1.0);
        let sigma_w = DMatrix::identity(1, 1);
        let sigma_v = DMatrix::identity(1, 1);
        match riccati_fixed_point(&a, &c, &sigma_w, &sigma_v, 1e-14, 2) {
            Err(LabError::Convergence { residual, iterations }) => {
                assert!(residual > 0.0);
                assert_eq!(iterations, 2);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn dlyap_scalar() {
        // x = 0.25 x + 1 => x = 4/3
        let a = DMatrix::from_element(1, 1, 0.5);
        let q = DMatrix::from_element(1, 1, 1.0);
        let x = dlyap(&a, &q, 1e-14, 200).unwrap();
        assert_relative_eq!(x[(0, 0)], 4.0 / 3.0, max_relative = 1e-12);
    }
}
