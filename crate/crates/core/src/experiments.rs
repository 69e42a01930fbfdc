//! Seeded Monte Carlo campaigns: bound-coverage frequencies, convergence-rate
//! fits, tail-dominance curves and excitation-event frequencies.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    arx_burn_in, arx_error_bound, hw_tail, nonlinear_bound, selfnorm_frobenius_bound,
    selfnorm_operator_bound, sparse_bound,
};
use crate::error::{LabError, Result};
use crate::estimators::{finite_class_lse, ols, sparse_lse, FiniteClass};
use crate::numerics::{logdet_psd, operator_norm, sym_eig_extremes, symmetrize};
use crate::systems::arx::ArxSystem;
use crate::systems::causal::CausalOperator;
use crate::systems::noise::{sample_noise, NoiseSpec, RngStream};
use crate::systems::state_space::StateSpaceInnovation;
use crate::systems::trajectory::{regressors, simulate_arx, Trajectory};

/// Two-sided 95% normal quantile used for the Wilson interval.
pub const WILSON_Z_95: f64 = 1.959963984540054;
/// PSD slack for excitation event checks.
pub const PE_EVENT_SLACK: f64 = 1e-10;
/// Stream-space salt separating pilot moment estimation from campaign trials.
const PILOT_SALT: u64 = 0x70696c6f74u64;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SystemSpec {
    Arx(ArxSpecFields),
    #[serde(rename = "statespace")]
    StateSpace(SsSpecFields),
}

/// Serializable ARX description (scalar coefficients only appear in configs;
/// matrix systems are built programmatically).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArxSpecFields {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub sigma_w: f64,
    pub sigma_u: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SsSpecFields {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub f: Vec<f64>,
    pub d_x: usize,
    pub d_u: usize,
    pub sigma_e: f64,
    pub sigma_u: f64,
}

impl SystemSpec {
    pub fn build_arx(&self) -> Result<ArxSystem> {
        match self {
            SystemSpec::Arx(f) => ArxSystem::scalar(&f.a, &f.b, f.sigma_w, f.sigma_u),
            SystemSpec::StateSpace(_) => Err(LabError::Config(
                "this campaign requires an arx system".into(),
            )),
        }
    }

    pub fn build_state_space(&self) -> Result<StateSpaceInnovation> {
        match self {
            SystemSpec::StateSpace(f) => {
                let a = DMatrix::from_row_slice(f.d_x, f.d_x, &f.a);
                let b = DMatrix::from_row_slice(f.d_x, f.d_u, &f.b);
                let c = DMatrix::from_row_slice(1, f.d_x, &f.c);
                let gain = DMatrix::from_row_slice(f.d_x, 1, &f.f);
                let se = DMatrix::from_element(1, 1, f.sigma_e);
                StateSpaceInnovation::new(a, b, c, gain, se, f.sigma_u)
            }
            SystemSpec::Arx(_) => Err(LabError::Config(
                "this campaign requires a state-space system".into(),
            )),
        }
    }
}

/// Campaign description: which system, which estimator-and-bound pair, which
/// grid of horizons and confidence levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub system: SystemSpec,
    pub noise: NoiseSpec,
    pub horizons: Vec<usize>,
    pub trials: usize,
    pub delta_grid: Vec<f64>,
    pub base_seed: u64,
    /// `tau` for ARX bounds, past horizon `p` for state-space regression.
    pub tau_or_p: usize,
    pub estimator: String,
    /// Block length: restart period for k-causal covariates, analysis block
    /// for the sparse bound.
    #[serde(default)]
    pub block_k: Option<usize>,
    #[serde(default)]
    pub sparsity: Option<usize>,
    /// Universal constant for the ARX and state-space error bounds.
    #[serde(default = "default_constant_c")]
    pub constant_c: f64,
    /// Scalar gains defining the finite hypothesis class.
    #[serde(default)]
    pub gain_grid: Vec<f64>,
    /// Index into `gain_grid` of the data-generating gain.
    #[serde(default)]
    pub true_gain_index: usize,
}

fn default_constant_c() -> f64 {
    crate::bounds::DEFAULT_UNIVERSAL_C
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(LabError::Config("trials must be at least 1".into()));
        }
        if self.horizons.is_empty() {
            return Err(LabError::Config("horizons must be nonempty".into()));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LabError::Config("horizons must be strictly increasing".into()));
        }
        if self.delta_grid.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
            return Err(LabError::Config("every delta must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageCell {
    pub t: usize,
    pub delta: f64,
    pub trials: usize,
    pub violations: usize,
    pub empirical_rate: f64,
    pub wilson_upper: f64,
    pub bound_value: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    pub experiment: String,
    pub cells: Vec<CoverageCell>,
}

impl CoverageReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "experiment,T,delta,trials,violations,empirical_rate,wilson_upper,bound_value,valid\n",
        );
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{:.16e},{},{},{:.16e},{:.16e},{:.16e},{}\n",
                self.experiment,
                c.t,
                c.delta,
                c.trials,
                c.violations,
                c.empirical_rate,
                c.wilson_upper,
                c.bound_value,
                c.valid
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub medians_per_t: Vec<(usize, f64)>,
}

impl RateFit {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("T,median_error\n");
        for (t, m) in &self.medians_per_t {
            out.push_str(&format!("{},{:.16e}\n", t, m));
        }
        out.push_str(&format!(
            "# slope,{:.16e}\n# intercept,{:.16e}\n# r2,{:.16e}\n",
            self.slope, self.intercept, self.r2
        ));
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailPoint {
    pub s: f64,
    pub empirical_ccdf: f64,
    pub hw_bound: f64,
}

/// Deterministic per-trial stream: a splitmix64-style mix of the base seed and
/// trial index (constants 0x9E3779B97F4A7C15, 0xBF58476D1CE4E5B9,
/// 0x94D049BB133111EB) expanded to the full 256-bit state.
pub fn derive_stream(base_seed: u64, trial_index: u64) -> RngStream {
    let mut state = base_seed ^ trial_index.wrapping_mul(0x9E3779B97F4A7C15);
    let mut next = || {
        state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    };
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&next().to_le_bytes());
    }
    RngStream::from_seed(seed)
}

/// Upper endpoint of the two-sided 95% Wilson score interval.
pub fn wilson_upper(violations: usize, trials: usize) -> f64 {
    let n = trials as f64;
    let z = WILSON_Z_95;
    let p_hat = violations as f64 / n;
    let z2 = z * z;
    (p_hat + z2 / (2.0 * n) + z * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt())
        / (1.0 + z2 / n)
}

/// Simulates `t + 1` steps and returns the design aligned with the model
/// convention: regressor rows for times `1..=t` and their targets.
fn arx_design(
    sys: &ArxSystem,
    noise: &NoiseSpec,
    t: usize,
    stream: &mut RngStream,
) -> Result<(DMatrix<f64>, DMatrix<f64>, Trajectory)> {
    let traj = simulate_arx(sys, noise, t + 1, stream, None)?;
    let (x_all, y_all) = regressors(&traj, sys.p(), sys.q())?;
    let x = x_all.rows(1, t).into_owned();
    let y = y_all.rows(1, t).into_owned();
    Ok((x, y, traj))
}

fn parallel_tally<F>(trials: usize, run: F) -> Result<(usize, f64)>
where
    F: Fn(usize) -> Result<(bool, f64)> + Sync,
{
    // collect in trial order, then fold sequentially: float accumulation must
    // not depend on how the scheduler splits the range
    let outcomes: Vec<(bool, f64)> = (0..trials)
        .into_par_iter()
        .map(&run)
        .collect::<Result<_>>()?;
    Ok(outcomes
        .into_iter()
        .fold((0usize, 0.0f64), |acc, (v, b)| (acc.0 + v as usize, acc.1 + b)))
}

fn make_cell(
    t: usize,
    delta: f64,
    trials: usize,
    violations: usize,
    bound_value: f64,
    valid: bool,
) -> CoverageCell {
    CoverageCell {
        t,
        delta,
        trials,
        violations,
        empirical_rate: violations as f64 / trials as f64,
        wilson_upper: wilson_upper(violations, trials),
        bound_value,
        valid,
    }
}

fn noise_sigma2(sys: &ArxSystem, noise: &NoiseSpec) -> f64 {
    let sigma_w = sys.sigma_w_sqrt() * sys.sigma_w_sqrt().transpose();
    operator_norm(&sigma_w) * noise.variance_proxy_k2()
}

fn cell_arx_ols(
    cfg: &ExperimentConfig,
    sys: &ArxSystem,
    t: usize,
    delta: f64,
    stream_base: u64,
) -> Result<CoverageCell> {
    let tau = cfg.tau_or_p;
    if tau < sys.p().max(sys.q()) || tau > t {
        return Err(LabError::Config("tau must satisfy max(p, q) <= tau <= T".into()));
    }
    let covs = sys.covariance_sequence(t);
    let (tau_min, _) = sym_eig_extremes(&covs[tau])?;
    if tau_min <= 0.0 {
        return Err(LabError::Excitation("Sigma_tau is singular".into()));
    }
    let k2 = cfg.noise.variance_proxy_k2();
    let dims = sys.regressor_dim();
    let snr = tau_min / noise_sigma2(sys, &cfg.noise);
    let logdet_cond = logdet_psd(&covs[t])? - logdet_psd(&covs[tau])?;
    let bound =
        arx_error_bound(snr, t, dims, delta, logdet_cond, cfg.constant_c)?.value;
    let burn = arx_burn_in(t, delta / 3.0, tau, k2, dims, operator_norm(&covs[t]), tau_min)?;
    let theta_star = sys.theta_star();
    let (violations, _) = parallel_tally(cfg.trials, |i| {
        let mut stream = derive_stream(cfg.base_seed, stream_base + i as u64);
        let (x, y, _) = arx_design(sys, &cfg.noise, t, &mut stream)?;
        let est = ols(&x, &y)?;
        let err = operator_norm(&(est.theta_hat - &theta_star));
        Ok((err * err > bound, bound))
    })?;
    Ok(make_cell(t, delta, cfg.trials, violations, bound, burn.valid))
}

fn cell_pe(
    cfg: &ExperimentConfig,
    sys: &ArxSystem,
    t: usize,
    delta: f64,
    stream_base: u64,
) -> Result<CoverageCell> {
    let tau = cfg.tau_or_p;
    if tau < sys.p().max(sys.q()) || tau > t {
        return Err(LabError::Config("tau must satisfy max(p, q) <= tau <= T".into()));
    }
    let covs = sys.covariance_sequence(t);
    let sigma_tau = covs[tau].clone();
    let (tau_min, _) = sym_eig_extremes(&sigma_tau)?;
    if tau_min <= 0.0 {
        return Err(LabError::Excitation("Sigma_tau is singular".into()));
    }
    let k2 = cfg.noise.variance_proxy_k2();
    let burn = arx_burn_in(
        t,
        delta,
        tau,
        k2,
        sys.regressor_dim(),
        operator_norm(&covs[t]),
        tau_min,
    )?;
    let (violations, _) = parallel_tally(cfg.trials, |i| {
        let mut stream = derive_stream(cfg.base_seed, stream_base + i as u64);
        let (x, _, _) = arx_design(sys, &cfg.noise, t, &mut stream)?;
        let emp = symmetrize(&(x.transpose() * &x / t as f64));
        let (gap_min, _) = sym_eig_extremes(&(emp - &sigma_tau / 16.0))?;
        Ok((gap_min < -PE_EVENT_SLACK, delta))
    })?;
    Ok(make_cell(t, delta, cfg.trials, violations, delta, burn.valid))
}

fn cell_selfnorm(
    cfg: &ExperimentConfig,
    sys: &ArxSystem,
    t: usize,
    delta: f64,
    stream_base: u64,
    operator: bool,
) -> Result<CoverageCell> {
    let sigma2 = noise_sigma2(sys, &cfg.noise);
    let d_y = sys.d_y();
    let theta_star = sys.theta_star();
    let dim = sys.regressor_dim();
    let (violations, bound_sum) = parallel_tally(cfg.trials, |i| {
        let mut stream = derive_stream(cfg.base_seed, stream_base + i as u64);
        let (x, y, _) = arx_design(sys, &cfg.noise, t, &mut stream)?;
        let v = &y - &x * theta_star.transpose();
        let s = x.transpose() * &v;
        let gram = DMatrix::identity(dim, dim) + x.transpose() * &x;
        let chol = gram
            .clone()
            .cholesky()
            .ok_or_else(|| LabError::Singular("regularized gram must be PD".into()))?;
        let q = symmetrize(&(s.transpose() * chol.solve(&s)));
        let logdet_ratio = logdet_psd(&gram)?;
        let (stat, bound) = if operator {
            let (_, max_eig) = sym_eig_extremes(&q)?;
            (max_eig, selfnorm_operator_bound(d_y, sigma2, logdet_ratio, delta)?.value)
        } else {
            (q.trace(), selfnorm_frobenius_bound(d_y, sigma2, logdet_ratio, delta)?.value)
        };
        Ok((stat > bound, bound))
    })?;
    let mean_bound = bound_sum / cfg.trials as f64;
    Ok(make_cell(t, delta, cfg.trials, violations, mean_bound, true))
}

fn cell_sparse(
    cfg: &ExperimentConfig,
    sys: &ArxSystem,
    t: usize,
    delta: f64,
    stream_base: u64,
) -> Result<CoverageCell> {
    let s = cfg
        .sparsity
        .ok_or_else(|| LabError::Config("sparse campaign needs a sparsity level".into()))?;
    let k = cfg
        .block_k
        .ok_or_else(|| LabError::Config("sparse campaign needs a block length".into()))?;
    if sys.d_y() != 1 || sys.q() != 0 {
        return Err(LabError::Config(
            "sparse campaign needs a scalar autoregression without inputs".into(),
        ));
    }
    let p = sys.p();
    let covs = sys.covariance_sequence(t);
    let avg = |j: usize| -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(covs[0].nrows(), covs[0].ncols());
        for cov in covs.iter().take(j + 1).skip(1) {
            acc += cov;
        }
        acc / j as f64
    };
    let avg_t = avg(t);
    let avg_k = avg(k);
    let (t_min, t_max) = sym_eig_extremes(&avg_t)?;
    let (k_min, _) = sym_eig_extremes(&avg_k)?;
    if t_min <= 0.0 || k_min <= 0.0 {
        return Err(LabError::Excitation("average covariances are singular".into()));
    }
    let (a_cal, b_cal) = sys.companion_embed();
    let l_norm = CausalOperator::new(&a_cal, &b_cal, t, k)?.operator_norm();
    let cond_sys = (1.0 + l_norm * l_norm / (k as f64 * t_min)) * t_max / k_min;
    let sigma2 = noise_sigma2(sys, &cfg.noise);
    let report = sparse_bound(sigma2, s, p, cond_sys, delta, t, k, 1.0, 1.0)?;
    let bound = report.value;
    let theta_star = sys.theta_star();
    let (violations, _) = parallel_tally(cfg.trials, |i| {
        let mut stream = derive_stream(cfg.base_seed, stream_base + i as u64);
        let (x, y, _) = arx_design(sys, &cfg.noise, t, &mut stream)?;
        let est = sparse_lse(&x, &y.column(0).into_owned(), s)?;
        let diff = &est.theta_hat - &theta_star;
        let maha2 = (&diff * &avg_k * diff.transpose())[(0, 0)];
        Ok((maha2 > bound, bound))
    })?;
    Ok(make_cell(t, delta, cfg.trials, violations, bound, report.valid))
}

fn gain_class(grid: &[f64]) -> Result<FiniteClass> {
    let members = grid
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let f: Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync> =
                Box::new(move |x: &DVector<f64>| x * g);
            (format!("gain_{i}"), f)
        })
        .collect();
    FiniteClass::new(members)
}

fn cell_nonlinear(
    cfg: &ExperimentConfig,
    sys: &ArxSystem,
    t: usize,
    delta: f64,
    stream_base: u64,
) -> Result<CoverageCell> {
    let k = cfg
        .block_k
        .ok_or_else(|| LabError::Config("nonlinear campaign needs a restart block".into()))?;
    if cfg.gain_grid.is_empty() || cfg.true_gain_index >= cfg.gain_grid.len() {
        return Err(LabError::Config(
            "nonlinear campaign needs a gain grid containing the true gain".into(),
        ));
    }
    if sys.p() != 1 || sys.q() != 0 || sys.d_y() != 1 {
        return Err(LabError::Config(
            "nonlinear campaign needs a scalar first-order covariate process".into(),
        ));
    }
    if t % k != 0 {
        return Err(LabError::Config("restart block must divide the horizon".into()));
    }
    let grid = cfg.gain_grid.clone();
    let g_star = grid[cfg.true_gain_index];
    let class = gain_class(&grid)?;

    // per-position variances of the restarted covariate path repeat with
    // period k; their mean is the L2 weight
    let block_covs = sys.covariance_sequence(k);
    let weight =
        block_covs.iter().skip(1).map(|c| c[(0, 0)]).sum::<f64>() / k as f64;

    // pilot moment estimation for the hypercontractivity ratio; the shifted
    // class {f - f*} of scalar gains has the same ratio as the identity map
    let pilot_paths: Vec<DMatrix<f64>> = (0..512)
        .map(|i| {
            let mut stream = derive_stream(cfg.base_seed ^ PILOT_SALT, i);
            simulate_arx(sys, &cfg.noise, k, &mut stream, Some(k)).map(|traj| traj.y)
        })
        .collect::<Result<_>>()?;
    let identity = gain_class(&[1.0])?;
    let cond_f = crate::bounds::cond_f_empirical(&identity, &pilot_paths)?.max(1.0);

    let sigma2 = cfg.noise.variance_proxy_k2();
    let report = nonlinear_bound(sigma2, grid.len() as f64, delta, t, k, cond_f)?;
    let bound = report.value;
    let (violations, _) = parallel_tally(cfg.trials, |i| {
        let mut stream = derive_stream(cfg.base_seed, stream_base + i as u64);
        let traj = simulate_arx(sys, &cfg.noise, t, &mut stream, Some(k))?;
        let x = traj.y.clone();
        let v = sample_noise(&cfg.noise, t, 1, &mut stream);
        let z = &x * g_star + v;
        let (best, _) = finite_class_lse(&class, &x, &z)?;
        let idx: usize = best
            .strip_prefix("gain_")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| LabError::Numeric("unrecognized member name".into()))?;
        let err = (grid[idx] - g_star).powi(2) * weight;
        Ok((err > bound, bound))
    })?;
    Ok(make_cell(t, delta, cfg.trials, violations, bound, report.valid))
}

/// Runs the configured coverage campaign over the full `(T, delta)` grid.
pub fn mc_coverage(cfg: &ExperimentConfig) -> Result<CoverageReport> {
    cfg.validate()?;
    let mut cells = Vec::new();
    let mut cell_index = 0u64;
    for &t in &cfg.horizons {
        for &delta in &cfg.delta_grid {
            let stream_base = cell_index * cfg.trials as u64;
            let cell = match cfg.estimator.as_str() {
                "arx_ols" => cell_arx_ols(cfg, &cfg.system.build_arx()?, t, delta, stream_base)?,
                "pe" => cell_pe(cfg, &cfg.system.build_arx()?, t, delta, stream_base)?,
                "selfnorm_frob" => {
                    cell_selfnorm(cfg, &cfg.system.build_arx()?, t, delta, stream_base, false)?
                }
                "selfnorm_op" => {
                    cell_selfnorm(cfg, &cfg.system.build_arx()?, t, delta, stream_base, true)?
                }
                "sparse" => cell_sparse(cfg, &cfg.system.build_arx()?, t, delta, stream_base)?,
                "nonlinear" => {
                    cell_nonlinear(cfg, &cfg.system.build_arx()?, t, delta, stream_base)?
                }
                other => {
                    return Err(LabError::Config(format!(
                        "unknown estimator identifier '{other}'"
                    )))
                }
            };
            cells.push(cell);
            cell_index += 1;
        }
    }
    Ok(CoverageReport { experiment: cfg.name.clone(), cells })
}

/// Least-squares line through `(x, y)` points with the coefficient of
/// determination; an exactly flat or perfectly fit cloud reports `r2 = 1`.
pub fn fit_line(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(LabError::Contract("need at least two points to fit".into()));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
    let sxy = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    if sxx == 0.0 {
        return Err(LabError::Contract("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum::<f64>();
    let ss_res = points
        .iter()
        .map(|p| {
            let r = p.1 - (slope * p.0 + intercept);
            r * r
        })
        .sum::<f64>();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((slope, intercept, r2))
}

/// Fits `log(median error)` against `log T` for the OLS estimator across the
/// configured horizons.
pub fn rate_fit(cfg: &ExperimentConfig) -> Result<RateFit> {
    cfg.validate()?;
    if cfg.horizons.len() < 4 {
        return Err(LabError::Config("rate fit needs at least 4 horizons".into()));
    }
    let sys = cfg.system.build_arx()?;
    let theta_star = sys.theta_star();
    let mut medians = Vec::new();
    for (h_idx, &t) in cfg.horizons.iter().enumerate() {
        let stream_base = h_idx as u64 * cfg.trials as u64;
        let mut errors: Vec<f64> = (0..cfg.trials)
            .into_par_iter()
            .map(|i| -> Result<f64> {
                let mut stream = derive_stream(cfg.base_seed, stream_base + i as u64);
                let (x, y, _) = arx_design(&sys, &cfg.noise, t, &mut stream)?;
                let est = ols(&x, &y)?;
                Ok(operator_norm(&(est.theta_hat - &theta_star)))
            })
            .collect::<Result<_>>()?;
        errors.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
        let median = if errors.len() % 2 == 1 {
            errors[errors.len() / 2]
        } else {
            0.5 * (errors[errors.len() / 2 - 1] + errors[errors.len() / 2])
        };
        if median <= 0.0 {
            return Err(LabError::Evaluation(format!(
                "degenerate zero-error cell at T = {t}"
            )));
        }
        medians.push((t, median));
    }
    let points: Vec<(f64, f64)> =
        medians.iter().map(|&(t, m)| ((t as f64).ln(), m.ln())).collect();
    let (slope, intercept, r2) = fit_line(&points)?;
    Ok(RateFit { slope, intercept, r2, medians_per_t: medians })
}

/// Empirical complementary CDF of the centered quadratic form `W'MW - tr M`
/// against the closed-form tail at each grid point.
pub fn tail_compare(
    m: &DMatrix<f64>,
    noise: &NoiseSpec,
    samples: usize,
    s_grid: &[f64],
    stream: &mut RngStream,
) -> Result<Vec<TailPoint>> {
    if samples < 1000 {
        return Err(LabError::Contract("tail comparison needs at least 1000 samples".into()));
    }
    if m.nrows() != m.ncols() {
        return Err(LabError::Dimension("quadratic form matrix must be square".into()));
    }
    let d = m.nrows();
    let expectation = m.trace();
    let mut deviations = Vec::with_capacity(samples);
    for _ in 0..samples {
        let w = sample_noise(noise, d, 1, stream);
        let q = (w.transpose() * m * &w)[(0, 0)];
        deviations.push((q - expectation).abs());
    }
    let sigma2 = noise.variance_proxy_k2();
    let m_frob = m.norm();
    let m_op = operator_norm(m);
    let mut out = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let count = deviations.iter().filter(|&&d| d > s).count();
        let bound = if m_frob > 0.0 && m_op > 0.0 {
            hw_tail(s, sigma2, m_frob, m_op)?.value
        } else {
            // zero matrix: the form is deterministic
            if s > 0.0 {
                0.0
            } else {
                1.0
            }
        };
        out.push(TailPoint {
            s,
            empirical_ccdf: count as f64 / samples as f64,
            hw_bound: bound,
        });
    }
    Ok(out)
}
