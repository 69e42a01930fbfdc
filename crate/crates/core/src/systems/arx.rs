//! ARX system definition, companion embedding and exact covariance recursions.

use nalgebra::DMatrix;

use crate::error::{LabError, Result};
use crate::numerics::{check_finite, sym_eig_extremes, symmetrize};

/// Tolerance on the non-explosiveness check `rho(companion) <= 1`.
pub const SPECTRAL_RADIUS_TOL: f64 = 1e-8;

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    check_finite(a, "matrix")?;
    if a.nrows() != a.ncols() {
        return Err(LabError::Dimension(format!(
            "spectral radius needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let eigs = a.clone().complex_eigenvalues();
    let rho = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if rho.is_finite() {
        Ok(rho)
    } else {
        Err(LabError::Numeric("eigenvalue computation failed".into()))
    }
}

/// Vector autoregression with exogenous inputs:
/// `Y_t = sum A_i Y_{t-i} + sum B_j U_{t-j} + Sigma_W^{1/2} W_t`.
///
/// Construction rejects explosive systems and degenerate noise covariance.
/// `q = 0` is allowed and means an autonomous (input-free) autoregression.
#[derive(Debug, Clone)]
pub struct ArxSystem {
    a_coeffs: Vec<DMatrix<f64>>,
    b_coeffs: Vec<DMatrix<f64>>,
    sigma_w_sqrt: DMatrix<f64>,
    input_std: f64,
    d_u: usize,
}

impl ArxSystem {
    pub fn new(
        a_coeffs: Vec<DMatrix<f64>>,
        b_coeffs: Vec<DMatrix<f64>>,
        sigma_w_sqrt: DMatrix<f64>,
        input_std: f64,
    ) -> Result<Self> {
        if a_coeffs.is_empty() {
            return Err(LabError::Contract("ARX needs p >= 1 output lags".into()));
        }
        let d_y = sigma_w_sqrt.nrows();
        if sigma_w_sqrt.ncols() != d_y {
            return Err(LabError::Dimension("Sigma_W^{1/2} must be square".into()));
        }
        for (i, a) in a_coeffs.iter().enumerate() {
            if a.shape() != (d_y, d_y) {
                return Err(LabError::Dimension(format!(
                    "A_{} must be {d_y}x{d_y}, got {}x{}",
                    i + 1,
                    a.nrows(),
                    a.ncols()
                )));
            }
            check_finite(a, "A coefficient")?;
        }
        let d_u = b_coeffs.first().map(|b| b.ncols()).unwrap_or(0);
        for (j, b) in b_coeffs.iter().enumerate() {
            if b.shape() != (d_y, d_u) {
                return Err(LabError::Dimension(format!(
                    "B_{} must be {d_y}x{d_u}, got {}x{}",
                    j + 1,
                    b.nrows(),
                    b.ncols()
                )));
            }
            check_finite(b, "B coefficient")?;
        }
        if input_std < 0.0 || !input_std.is_finite() {
            return Err(LabError::Contract("input_std must be finite and >= 0".into()));
        }
        let sigma_w = symmetrize(&(&sigma_w_sqrt * sigma_w_sqrt.transpose()));
        let (lambda_min, _) = sym_eig_extremes(&sigma_w)?;
        if lambda_min <= 0.0 {
            return Err(LabError::Contract(format!(
                "Sigma_W must be positive definite, lambda_min = {lambda_min:e}"
            )));
        }
        let sys = ArxSystem { a_coeffs, b_coeffs, sigma_w_sqrt, input_std, d_u };
        let rho = spectral_radius(&sys.companion_top_left())?;
        if rho > 1.0 + SPECTRAL_RADIUS_TOL {
            return Err(LabError::Contract(format!(
                "explosive system rejected: rho(companion) = {rho}"
            )));
        }
        Ok(sys)
    }

    /// Scalar ARX from plain coefficient lists.
    pub fn scalar(a: &[f64], b: &[f64], sigma_w: f64, input_std: f64) -> Result<Self> {
        let a_coeffs = a.iter().map(|&x| DMatrix::from_element(1, 1, x)).collect();
        let b_coeffs = b.iter().map(|&x| DMatrix::from_element(1, 1, x)).collect();
        Self::new(a_coeffs, b_coeffs, DMatrix::from_element(1, 1, sigma_w), input_std)
    }

    pub fn p(&self) -> usize {
        self.a_coeffs.len()
    }

    pub fn q(&self) -> usize {
        self.b_coeffs.len()
    }

    pub fn d_y(&self) -> usize {
        self.sigma_w_sqrt.nrows()
    }

    pub fn d_u(&self) -> usize {
        self.d_u
    }

    pub fn a_coeffs(&self) -> &[DMatrix<f64>] {
        &self.a_coeffs
    }

    pub fn b_coeffs(&self) -> &[DMatrix<f64>] {
        &self.b_coeffs
    }

    pub fn sigma_w_sqrt(&self) -> &DMatrix<f64> {
        &self.sigma_w_sqrt
    }

    pub fn input_std(&self) -> f64 {
        self.input_std
    }

    /// Dimension of the stacked regressor `[Y lags; U lags]`.
    pub fn regressor_dim(&self) -> usize {
        self.p() * self.d_y() + self.q() * self.d_u
    }

    /// True coefficient matrix `[A_1..A_p, B_1..B_q]` in regressor order.
    pub fn theta_star(&self) -> DMatrix<f64> {
        let d_y = self.d_y();
        let mut theta = DMatrix::zeros(d_y, self.regressor_dim());
        for (i, a) in self.a_coeffs.iter().enumerate() {
            theta.view_mut((0, i * d_y), (d_y, d_y)).copy_from(a);
        }
        let off = self.p() * d_y;
        for (j, b) in self.b_coeffs.iter().enumerate() {
            theta.view_mut((0, off + j * self.d_u), (d_y, self.d_u)).copy_from(b);
        }
        theta
    }

    /// Companion block holding the output-lag dynamics (the block whose
    /// spectral radius decides non-explosiveness).
    pub fn companion_top_left(&self) -> DMatrix<f64> {
        let d_y = self.d_y();
        let p = self.p();
        let n = p * d_y;
        let mut a11 = DMatrix::zeros(n, n);
        for (i, a) in self.a_coeffs.iter().enumerate() {
            a11.view_mut((0, i * d_y), (d_y, d_y)).copy_from(a);
        }
        for i in 1..p {
            a11.view_mut((i * d_y, (i - 1) * d_y), (d_y, d_y))
                .copy_from(&DMatrix::identity(d_y, d_y));
        }
        a11
    }

    /// First-order embedding of the covariate recursion: returns `(A, B)`
    /// such that the stacked regressor evolves as `X_{t+1} = A X_t + B v_t`
    /// with `v_t = [W_t; U_t]`, `W_t` normalized and `U_t ~ N(0, sigma_u^2 I)`.
    pub fn companion_embed(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let d_y = self.d_y();
        let d_u = self.d_u;
        let (p, q) = (self.p(), self.q());
        let n = p * d_y + q * d_u;
        let mut a_cal = DMatrix::zeros(n, n);
        a_cal.view_mut((0, 0), (p * d_y, p * d_y)).copy_from(&self.companion_top_left());
        // A_12: first block row carries [B_1 .. B_q]
        for (j, b) in self.b_coeffs.iter().enumerate() {
            a_cal.view_mut((0, p * d_y + j * d_u), (d_y, d_u)).copy_from(b);
        }
        // A_22: shift of the input lags (first block row zero)
        for j in 1..q {
            a_cal
                .view_mut((p * d_y + j * d_u, p * d_y + (j - 1) * d_u), (d_u, d_u))
                .copy_from(&DMatrix::identity(d_u, d_u));
        }
        let mut b_cal = DMatrix::zeros(n, d_y + d_u);
        b_cal.view_mut((0, 0), (d_y, d_y)).copy_from(&self.sigma_w_sqrt);
        if q > 0 {
            b_cal
                .view_mut((p * d_y, d_y), (d_u, d_u))
                .copy_from(&DMatrix::identity(d_u, d_u));
        }
        (a_cal, b_cal)
    }

    /// Driving-noise covariance `blkdiag(I_{dY}, sigma_u^2 I_{dU})` of the
    /// stacked `v_t = [W_t; U_t]`.
    pub fn drive_covariance(&self) -> DMatrix<f64> {
        let d_y = self.d_y();
        let d_u = self.d_u;
        let mut g = DMatrix::zeros(d_y + d_u, d_y + d_u);
        g.view_mut((0, 0), (d_y, d_y)).copy_from(&DMatrix::identity(d_y, d_y));
        let s2 = self.input_std * self.input_std;
        for i in 0..d_u {
            g[(d_y + i, d_y + i)] = s2;
        }
        g
    }

    /// Exact regressor covariances `Sigma_t = E X_t X_t^T` for `t = 0..=T`,
    /// from the zero initial condition.
    pub fn covariance_sequence(&self, horizon: usize) -> Vec<DMatrix<f64>> {
        let (a_cal, b_cal) = self.companion_embed();
        let drive = &b_cal * self.drive_covariance() * b_cal.transpose();
        let n = a_cal.nrows();
        let mut out = Vec::with_capacity(horizon + 1);
        let mut sigma = DMatrix::zeros(n, n);
        out.push(sigma.clone());
        for _ in 0..horizon {
            sigma = symmetrize(&(&a_cal * &sigma * a_cal.transpose() + &drive));
            out.push(sigma.clone());
        }
        out
    }
}
