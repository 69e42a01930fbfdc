//! Innovation-form state-space systems, Markov parameters and the conversion
//! from standard (process/measurement noise) form via the Riccati fixed point.

use nalgebra::DMatrix;

use crate::error::{LabError, Result};
use crate::numerics::{
    check_finite, psd_sqrt, riccati_fixed_point, sym_eig_extremes, symmetrize,
    RICCATI_DEFAULT_MAX_ITER, RICCATI_DEFAULT_TOL,
};
use crate::systems::arx::{spectral_radius, SPECTRAL_RADIUS_TOL};

/// State-space system in innovation form:
/// `X_{t+1} = A X_t + B U_t + F Sigma_E^{1/2} E_t`,
/// `Y_t = C X_t + Sigma_E^{1/2} E_t`.
///
/// Construction enforces non-explosiveness of `A` and the minimum-phase
/// property `rho(A - F C) < 1`.
#[derive(Debug, Clone)]
pub struct StateSpaceInnovation {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    f: DMatrix<f64>,
    sigma_e_sqrt: DMatrix<f64>,
    input_std: f64,
}

impl StateSpaceInnovation {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        f: DMatrix<f64>,
        sigma_e_sqrt: DMatrix<f64>,
        input_std: f64,
    ) -> Result<Self> {
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&f, "F"), (&sigma_e_sqrt, "Sigma_E^{1/2}")] {
            check_finite(m, name)?;
        }
        let d_x = a.nrows();
        let d_y = c.nrows();
        if a.ncols() != d_x {
            return Err(LabError::Dimension("A must be square".into()));
        }
        if b.nrows() != d_x || c.ncols() != d_x || f.nrows() != d_x || f.ncols() != d_y {
            return Err(LabError::Dimension("B, C, F shapes must conform with A".into()));
        }
        if sigma_e_sqrt.shape() != (d_y, d_y) {
            return Err(LabError::Dimension("Sigma_E^{1/2} must be d_Y x d_Y".into()));
        }
        let sigma_e = symmetrize(&(&sigma_e_sqrt * sigma_e_sqrt.transpose()));
        let (lambda_min, _) = sym_eig_extremes(&sigma_e)?;
        if lambda_min <= 0.0 {
            return Err(LabError::Contract(format!(
                "Sigma_E must be positive definite, lambda_min = {lambda_min:e}"
            )));
        }
        let rho_a = spectral_radius(&a)?;
        if rho_a > 1.0 + SPECTRAL_RADIUS_TOL {
            return Err(LabError::Contract(format!("explosive system rejected: rho(A) = {rho_a}")));
        }
        let rho_cl = spectral_radius(&(&a - &f * &c))?;
        if rho_cl >= 1.0 {
            return Err(LabError::Contract(format!(
                "minimum-phase violated: rho(A - F C) = {rho_cl}"
            )));
        }
        if input_std < 0.0 || !input_std.is_finite() {
            return Err(LabError::Contract("input_std must be finite and >= 0".into()));
        }
        Ok(StateSpaceInnovation { a, b, c, f, sigma_e_sqrt, input_std })
    }

    /// Innovation form equivalent to the standard state-space model with
    /// process noise `Sigma_W` and measurement noise `Sigma_V`, obtained by
    /// solving the Riccati equation for the steady-state Kalman predictor.
    pub fn from_standard(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        sigma_w: &DMatrix<f64>,
        sigma_v: &DMatrix<f64>,
        input_std: f64,
    ) -> Result<Self> {
        let sol = riccati_fixed_point(&a, &c, sigma_w, sigma_v, RICCATI_DEFAULT_TOL, RICCATI_DEFAULT_MAX_ITER)?;
        let sigma_e_sqrt = psd_sqrt(&sol.sigma_e)?;
        Self::new(a, b, c, sol.f_star, sigma_e_sqrt, input_std)
    }

    pub fn d_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn d_y(&self) -> usize {
        self.c.nrows()
    }

    pub fn d_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn sigma_e_sqrt(&self) -> &DMatrix<f64> {
        &self.sigma_e_sqrt
    }

    pub fn sigma_e(&self) -> DMatrix<f64> {
        symmetrize(&(&self.sigma_e_sqrt * self.sigma_e_sqrt.transpose()))
    }

    pub fn input_std(&self) -> f64 {
        self.input_std
    }

    /// Closed-loop (predictor) matrix `A - F C`.
    pub fn a_cl(&self) -> DMatrix<f64> {
        &self.a - &self.f * &self.c
    }

    /// Markov parameters up to horizon `p`, laid out as
    /// `[C B, C A_cl B, .., C A_cl^{p-1} B, C F, C A_cl F, .., C A_cl^{p-1} F]`.
    pub fn markov_params(&self, p: usize) -> Result<DMatrix<f64>> {
        if p == 0 {
            return Err(LabError::Contract("markov_params needs p >= 1".into()));
        }
        let (d_y, d_u) = (self.d_y(), self.d_u());
        let a_cl = self.a_cl();
        let mut theta = DMatrix::zeros(d_y, p * (d_u + d_y));
        let mut pow_b = self.b.clone();
        let mut pow_f = self.f.clone();
        for i in 0..p {
            theta.view_mut((0, i * d_u), (d_y, d_u)).copy_from(&(&self.c * &pow_b));
            theta
                .view_mut((0, p * d_u + i * d_y), (d_y, d_y))
                .copy_from(&(&self.c * &pow_f));
            if i + 1 < p {
                pow_b = &a_cl * pow_b;
                pow_f = &a_cl * pow_f;
            }
        }
        Ok(theta)
    }

    /// [`markov_params`](Self::markov_params) reordered to match the regressor
    /// stack `[Y lags; U lags]`: the `C A_cl^i F` half comes first.
    pub fn markov_params_regressor_order(&self, p: usize) -> Result<DMatrix<f64>> {
        let theta = self.markov_params(p)?;
        let (d_y, d_u) = (self.d_y(), self.d_u());
        let mut out = DMatrix::zeros(d_y, p * (d_u + d_y));
        out.view_mut((0, 0), (d_y, p * d_y))
            .copy_from(&theta.view((0, p * d_u), (d_y, p * d_y)));
        out.view_mut((0, p * d_y), (d_y, p * d_u))
            .copy_from(&theta.view((0, 0), (d_y, p * d_u)));
        Ok(out)
    }

    /// State covariances `Sigma_{X,t} = E X_t X_t^T` for `t = 0..=T`.
    pub fn state_covariance_sequence(&self, horizon: usize) -> Vec<DMatrix<f64>> {
        let d_x = self.d_x();
        let s2 = self.input_std * self.input_std;
        let f_se = &self.f * &self.sigma_e_sqrt;
        let drive = symmetrize(&(&self.b * self.b.transpose() * s2 + &f_se * f_se.transpose()));
        let mut out = Vec::with_capacity(horizon + 1);
        let mut sigma = DMatrix::zeros(d_x, d_x);
        out.push(sigma.clone());
        for _ in 0..horizon {
            sigma = symmetrize(&(&self.a * &sigma * self.a.transpose() + &drive));
            out.push(sigma.clone());
        }
        out
    }

    /// Exact covariances `Sigma_{p,t} = E Z_t Z_t^T` of the depth-`p` stacked
    /// regressors `Z_t = [Y_{t-1:t-p}; U_{t-1:t-p}]`, for `t = 0..=T`, via an
    /// augmented first-order recursion on `[X_t; Y lags; U lags]`.
    pub fn regressor_covariance_sequence(&self, p: usize, horizon: usize) -> Result<Vec<DMatrix<f64>>> {
        if p == 0 {
            return Err(LabError::Contract("regressor depth p must be >= 1".into()));
        }
        let (d_x, d_y, d_u) = (self.d_x(), self.d_y(), self.d_u());
        let n = d_x + p * d_y + p * d_u;
        let y_off = d_x;
        let u_off = d_x + p * d_y;

        let mut a_aug = DMatrix::zeros(n, n);
        a_aug.view_mut((0, 0), (d_x, d_x)).copy_from(&self.a);
        // newest Y lag is Y_t = C X_t + Se E_t
        a_aug.view_mut((y_off, 0), (d_y, d_x)).copy_from(&self.c);
        for i in 1..p {
            a_aug
                .view_mut((y_off + i * d_y, y_off + (i - 1) * d_y), (d_y, d_y))
                .copy_from(&DMatrix::identity(d_y, d_y));
            a_aug
                .view_mut((u_off + i * d_u, u_off + (i - 1) * d_u), (d_u, d_u))
                .copy_from(&DMatrix::identity(d_u, d_u));
        }

        let mut b_aug = DMatrix::zeros(n, d_y + d_u);
        let f_se = &self.f * &self.sigma_e_sqrt;
        b_aug.view_mut((0, 0), (d_x, d_y)).copy_from(&f_se);
        b_aug.view_mut((0, d_y), (d_x, d_u)).copy_from(&self.b);
        b_aug.view_mut((y_off, 0), (d_y, d_y)).copy_from(&self.sigma_e_sqrt);
        b_aug.view_mut((u_off, d_y), (d_u, d_u)).copy_from(&DMatrix::identity(d_u, d_u));

        let s2 = self.input_std * self.input_std;
        let mut gamma = DMatrix::zeros(d_y + d_u, d_y + d_u);
        gamma.view_mut((0, 0), (d_y, d_y)).copy_from(&DMatrix::identity(d_y, d_y));
        for i in 0..d_u {
            gamma[(d_y + i, d_y + i)] = s2;
        }
        let drive = &b_aug * gamma * b_aug.transpose();

        let z_dim = p * (d_y + d_u);
        let mut out = Vec::with_capacity(horizon + 1);
        let mut sigma = DMatrix::zeros(n, n);
        out.push(DMatrix::zeros(z_dim, z_dim));
        for _ in 0..horizon {
            sigma = symmetrize(&(&a_aug * &sigma * a_aug.transpose() + &drive));
            out.push(sigma.view((y_off, y_off), (z_dim, z_dim)).into_owned());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_sys(a: f64, b: f64, c: f64, f: f64, sigma_e: f64, sigma_u: f64) -> StateSpaceInnovation {
        StateSpaceInnovation::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, c),
            DMatrix::from_element(1, 1, f),
            DMatrix::from_element(1, 1, sigma_e),
            sigma_u,
        )
        .unwrap()
    }

    #[test]
    fn markov_params_first_order() {
        let sys = scalar_sys(0.5, 1.0, 1.0, 0.2, 1.0, 1.0);
        let theta = sys.markov_params(1).unwrap();
        assert_eq!(theta, DMatrix::from_row_slice(1, 2, &[1.0, 0.2]));
    }

    #[test]
    fn markov_params_hand_multiplied() {
        // a_cl = 0.5 - 0.2 = 0.3, so [cb, c a_cl b, cf, c a_cl f] = [1, 0.3, 0.2, 0.06]
        let sys = scalar_sys(0.5, 1.0, 1.0, 0.2, 1.0, 1.0);
        let theta = sys.markov_params(2).unwrap();
        let expected = DMatrix::from_row_slice(1, 4, &[1.0, 0.3, 0.2, 0.06]);
        assert_relative_eq!((theta - expected).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn markov_params_zero_gain_open_loop() {
        let sys = scalar_sys(0.5, 1.0, 2.0, 0.0, 1.0, 1.0);
        let theta = sys.markov_params(3).unwrap();
        // left half: open-loop c a^i b; right half zero
        let expected = DMatrix::from_row_slice(1, 6, &[2.0, 1.0, 0.5, 0.0, 0.0, 0.0]);
        assert_relative_eq!((theta - expected).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn markov_params_prefix_property() {
        let sys = scalar_sys(0.7, 0.4, 1.3, 0.3, 1.5, 1.0);
        let short = sys.markov_params(2).unwrap();
        let long = sys.markov_params(3).unwrap();
        // both halves extend as prefixes
        for i in 0..2 {
            assert_eq!(short[(0, i)], long[(0, i)]);
            assert_eq!(short[(0, 2 + i)], long[(0, 3 + i)]);
        }
    }

    #[test]
    fn from_standard_zero_dynamics() {
        let a = DMatrix::zeros(2, 2);
        let b = DMatrix::zeros(2, 1);
        let c = DMatrix::identity(2, 2);
        let sigma_w = DMatrix::identity(2, 2);
        let sigma_v = DMatrix::identity(2, 2);
        let sys = StateSpaceInnovation::from_standard(a, b, c, &sigma_w, &sigma_v, 0.0).unwrap();
        assert_relative_eq!(sys.f().norm(), 0.0, epsilon = 1e-10);
        assert_relative_eq!((sys.sigma_e() - DMatrix::identity(2, 2) * 2.0).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn from_standard_zero_process_noise() {
        let a = DMatrix::from_element(1, 1, 0.5);
        let b = DMatrix::from_element(1, 1, 1.0);
        let c = DMatrix::from_element(1, 1, 1.0);
        let sys = StateSpaceInnovation::from_standard(
            a,
            b,
            c,
            &DMatrix::zeros(1, 1),
            &DMatrix::identity(1, 1),
            1.0,
        )
        .unwrap();
        assert_relative_eq!(sys.f()[(0, 0)], 0.0, epsilon = 1e-9);
        assert_relative_eq!(sys.sigma_e()[(0, 0)], 1.0, max_relative = 1e-9);
    }

    #[test]
    fn minimum_phase_violation_rejected() {
        // A - FC = 0.9 - (-0.5) = 1.4
        let r = StateSpaceInnovation::new(
            DMatrix::from_element(1, 1, 0.9),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, -0.5),
            DMatrix::from_element(1, 1, 1.0),
            1.0,
        );
        assert!(matches!(r, Err(LabError::Contract(_))));
    }

    #[test]
    fn regressor_covariance_dimensions_and_growth() {
        let sys = scalar_sys(0.6, 0.8, 1.0, 0.25, 1.0, 0.7);
        let cov = sys.regressor_covariance_sequence(2, 10).unwrap();
        assert_eq!(cov.len(), 11);
        assert_eq!(cov[5].shape(), (4, 4));
        for w in cov.windows(2) {
            let (lambda_min, _) = sym_eig_extremes(&(&w[1] - &w[0])).unwrap();
            assert!(lambda_min >= -1e-10);
        }
    }
}
