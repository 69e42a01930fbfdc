//! Closed-form tail bounds, burn-in times and finite-sample error bounds.
//! Every evaluator is pure and scalar-in/scalar-out; matrix reductions such as
//! log-det conditioning terms are computed by callers.

use std::collections::BTreeMap;
use std::f64::consts::{E, SQRT_2};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::estimators::FiniteClass;
use crate::numerics::{operator_norm, sym_eig_extremes, symmetrize};
use crate::systems::arx::ArxSystem;
use crate::systems::noise::NoiseSpec;
use crate::systems::state_space::StateSpaceInnovation;

/// Default universal constant for the ARX and state-space error bounds.
pub const DEFAULT_UNIVERSAL_C: f64 = 128.0;
/// Cap for the persistence-of-excitation fixed-point search.
pub const T_PE_SEARCH_CAP: usize = 10_000_000;

/// One evaluated bound: the value, a full echo of the scalar inputs and a
/// validity flag. Probability-type values are clamped to [0, 1] with the raw
/// value kept under `raw_value` in the echo.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub value: f64,
    pub inputs: BTreeMap<String, f64>,
    pub valid: bool,
}

impl BoundReport {
    fn probability(name: &str, raw: f64, inputs: Vec<(&str, f64)>) -> Self {
        let mut map: BTreeMap<String, f64> =
            inputs.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        map.insert("raw_value".into(), raw);
        BoundReport {
            name: name.to_string(),
            value: raw.clamp(0.0, 1.0),
            inputs: map,
            valid: raw.is_finite(),
        }
    }

    fn quantity(name: &str, value: f64, inputs: Vec<(&str, f64)>) -> Self {
        BoundReport {
            name: name.to_string(),
            value,
            inputs: inputs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            valid: value.is_finite(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| LabError::Numeric(format!("bound report serialization failed: {e}")))
    }
}

/// Signal-to-noise inputs: smallest excitation eigenvalue over the noise
/// magnitude and sub-Gaussian proxy.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SnrContext {
    pub sigma_tau_min_eig: f64,
    pub noise_op_norm: f64,
    pub k2: f64,
    pub tau: usize,
}

impl SnrContext {
    pub fn new(sigma_tau_min_eig: f64, noise_op_norm: f64, k2: f64, tau: usize) -> Result<Self> {
        if !(sigma_tau_min_eig > 0.0 && noise_op_norm > 0.0 && k2 > 0.0 && tau > 0) {
            return Err(LabError::Contract(
                "snr context requires strictly positive entries".into(),
            ));
        }
        Ok(SnrContext { sigma_tau_min_eig, noise_op_norm, k2, tau })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(LabError::Contract(format!(
            "confidence level delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

fn check_divides(t: usize, k: usize) -> Result<()> {
    if k == 0 || t % k != 0 {
        return Err(LabError::Contract(format!(
            "block length {k} must divide the horizon {t}"
        )));
    }
    Ok(())
}

/// `exp(-s^2 / (2 sigma^2))`.
pub fn gaussian_tail(s: f64, sigma2: f64) -> Result<BoundReport> {
    if s < 0.0 || sigma2 <= 0.0 {
        return Err(LabError::Contract("gaussian tail needs s >= 0, sigma2 > 0".into()));
    }
    let raw = (-s * s / (2.0 * sigma2)).exp();
    Ok(BoundReport::probability("gaussian_tail", raw, vec![("s", s), ("sigma2", sigma2)]))
}

/// Two-regime quadratic-form tail
/// `2 exp(-min(s^2 / (144 sigma^4 F^2), s / (16 sqrt2 sigma^2 Op)))`.
pub fn hw_tail(s: f64, sigma2: f64, m_frob: f64, m_op: f64) -> Result<BoundReport> {
    if s < 0.0 || sigma2 <= 0.0 || m_frob <= 0.0 || m_op <= 0.0 {
        return Err(LabError::Contract(
            "hw tail needs s >= 0 and positive sigma2 and norms".into(),
        ));
    }
    let quad = s * s / (144.0 * sigma2 * sigma2 * m_frob * m_frob);
    let lin = s / (16.0 * SQRT_2 * sigma2 * m_op);
    let raw = 2.0 * (-quad.min(lin)).exp();
    Ok(BoundReport::probability(
        "hw_tail",
        raw,
        vec![("s", s), ("sigma2", sigma2), ("m_frob", m_frob), ("m_op", m_op)],
    ))
}

/// Deviation level at which the quadratic and linear regimes of `hw_tail`
/// exchange dominance.
pub fn hw_regime_switch(sigma2: f64, m_frob: f64, m_op: f64) -> f64 {
    144.0 * sigma2 * m_frob * m_frob / (16.0 * SQRT_2 * m_op)
}

/// Quadratic-form MGF exponent `36 lambda^2 sigma^4 F^2`, admissible only for
/// `|lambda| <= 1 / (8 sqrt2 sigma^2 Op)`.
pub fn hw_mgf_exponent(lambda: f64, sigma2: f64, m_frob: f64, m_op: f64) -> Result<BoundReport> {
    if sigma2 <= 0.0 || m_frob <= 0.0 || m_op <= 0.0 {
        return Err(LabError::Contract("mgf exponent needs positive sigma2 and norms".into()));
    }
    let limit = 1.0 / (8.0 * SQRT_2 * sigma2 * m_op);
    if lambda.abs() > limit {
        return Err(LabError::Contract(format!(
            "|lambda| = {} exceeds the admissible range {limit}",
            lambda.abs()
        )));
    }
    let value = 36.0 * lambda * lambda * sigma2 * sigma2 * m_frob * m_frob;
    Ok(BoundReport::quantity(
        "hw_mgf_exponent",
        value,
        vec![("lambda", lambda), ("sigma2", sigma2), ("m_frob", m_frob), ("m_op", m_op), ("lambda_limit", limit)],
    ))
}

/// Sphere covering-number bound `(1 + 2/eps)^d`.
pub fn covering_cardinality_bound(eps: f64, d: usize) -> Result<BoundReport> {
    if eps <= 0.0 {
        return Err(LabError::Contract("covering radius must be positive".into()));
    }
    let value = (1.0 + 2.0 / eps).powi(d as i32);
    Ok(BoundReport::quantity(
        "covering_cardinality_bound",
        value,
        vec![("eps", eps), ("d", d as f64)],
    ))
}

/// Failure probability `exp(-eps^2 / (576 K^2 M^2 L^2) + d_X log 18)` of the
/// uniform spectrum deviation event.
pub fn spectrum_deviation_failure(
    eps: f64,
    k2: f64,
    m_op: f64,
    l_op: f64,
    d_x: usize,
) -> Result<BoundReport> {
    if eps < 0.0 || k2 <= 0.0 || m_op <= 0.0 || l_op <= 0.0 {
        return Err(LabError::Contract(
            "spectrum deviation needs nonnegative eps and positive scales".into(),
        ));
    }
    let exponent = -eps * eps / (576.0 * k2 * m_op * m_op * l_op * l_op)
        + d_x as f64 * 18.0_f64.ln();
    let raw = exponent.exp();
    Ok(BoundReport::probability(
        "spectrum_deviation_failure",
        raw,
        vec![("eps", eps), ("k2", k2), ("m_op", m_op), ("l_op", l_op), ("d_x", d_x as f64)],
    ))
}

/// Excitation constant
/// `1 + 4 sqrt2 ((T L2 / (18 k lam_min) + 9) lam_max) / lam_min_decoupled`.
pub fn csys(
    t: usize,
    k: usize,
    l_op2: f64,
    sum_cov_min: f64,
    sum_cov_max: f64,
    sum_decoupled_min: f64,
) -> Result<BoundReport> {
    if sum_cov_min <= 0.0 || sum_decoupled_min <= 0.0 {
        return Err(LabError::Excitation(
            "degenerate excitation: covariance sums must be positive definite".into(),
        ));
    }
    if k == 0 {
        return Err(LabError::Contract("block length must be positive".into()));
    }
    let value = 1.0
        + 4.0 * SQRT_2
            * ((t as f64 * l_op2 / (18.0 * k as f64 * sum_cov_min) + 9.0) * sum_cov_max)
            / sum_decoupled_min;
    Ok(BoundReport::quantity(
        "csys",
        value,
        vec![
            ("t", t as f64),
            ("k", k as f64),
            ("l_op2", l_op2),
            ("sum_cov_min", sum_cov_min),
            ("sum_cov_max", sum_cov_max),
            ("sum_decoupled_min", sum_decoupled_min),
        ],
    ))
}

/// Lower-tail failure probability `c_sys^d exp(-T / (576 K^2 k))`.
pub fn lower_tail_failure(t: usize, k: usize, k2: f64, d: usize, c_sys: f64) -> Result<BoundReport> {
    check_divides(t, k)?;
    if k2 <= 0.0 || c_sys < 1.0 {
        return Err(LabError::Contract("needs K2 > 0 and c_sys >= 1".into()));
    }
    let raw = c_sys.powi(d as i32) * (-(t as f64) / (576.0 * k2 * k as f64)).exp();
    Ok(BoundReport::probability(
        "lower_tail_failure",
        raw,
        vec![("t", t as f64), ("k", k as f64), ("k2", k2), ("d", d as f64), ("c_sys", c_sys)],
    ))
}

/// Squared-Frobenius self-normalized bound
/// `d_Y sigma^2 logdet_ratio + 2 sigma^2 log(1/delta)`.
pub fn selfnorm_frobenius_bound(
    d_y: usize,
    sigma2: f64,
    logdet_ratio: f64,
    delta: f64,
) -> Result<BoundReport> {
    check_delta(delta)?;
    if logdet_ratio < 0.0 || sigma2 <= 0.0 {
        return Err(LabError::Contract("needs logdet_ratio >= 0 and sigma2 > 0".into()));
    }
    let value = d_y as f64 * sigma2 * logdet_ratio + 2.0 * sigma2 * (1.0 / delta).ln();
    Ok(BoundReport::quantity(
        "selfnorm_frobenius_bound",
        value,
        vec![("d_y", d_y as f64), ("sigma2", sigma2), ("logdet_ratio", logdet_ratio), ("delta", delta)],
    ))
}

/// Squared-operator self-normalized bound
/// `4 sigma^2 logdet_ratio + 8 d_Y sigma^2 log 5 + 8 sigma^2 log(1/delta)`.
pub fn selfnorm_operator_bound(
    d_y: usize,
    sigma2: f64,
    logdet_ratio: f64,
    delta: f64,
) -> Result<BoundReport> {
    check_delta(delta)?;
    if logdet_ratio < 0.0 || sigma2 <= 0.0 {
        return Err(LabError::Contract("needs logdet_ratio >= 0 and sigma2 > 0".into()));
    }
    let value = 4.0 * sigma2 * logdet_ratio
        + 8.0 * d_y as f64 * sigma2 * 5.0_f64.ln()
        + 8.0 * sigma2 * (1.0 / delta).ln();
    Ok(BoundReport::quantity(
        "selfnorm_operator_bound",
        value,
        vec![("d_y", d_y as f64), ("sigma2", sigma2), ("logdet_ratio", logdet_ratio), ("delta", delta)],
    ))
}

/// Worst-case signal-to-noise ratio `lam_min(Sigma_tau) / (noise_norm K^2)`.
pub fn snr(ctx: &SnrContext) -> BoundReport {
    let value = ctx.sigma_tau_min_eig / (ctx.noise_op_norm * ctx.k2);
    BoundReport::quantity(
        "snr",
        value,
        vec![
            ("sigma_tau_min_eig", ctx.sigma_tau_min_eig),
            ("noise_op_norm", ctx.noise_op_norm),
            ("k2", ctx.k2),
            ("tau", ctx.tau as f64),
        ],
    )
}

/// Persistence-of-excitation burn-in
/// `T0 = 1152 tau max{K^2,1} (dims log C_sys(T,tau) + log(1/delta))` with
/// `C_sys(T,tau) = (2T/3tau) |Sigma_T|^2 / lam_min(Sigma_tau)^2`. The report
/// value is `T0`; `valid` records `T >= T0`.
pub fn arx_burn_in(
    t: usize,
    delta: f64,
    tau: usize,
    k2: f64,
    dims: usize,
    sigma_t_op: f64,
    sigma_tau_min: f64,
) -> Result<BoundReport> {
    check_delta(delta)?;
    if tau == 0 || k2 <= 0.0 || sigma_t_op <= 0.0 {
        return Err(LabError::Contract("needs tau >= 1, K2 > 0, |Sigma_T| > 0".into()));
    }
    if sigma_tau_min <= 0.0 {
        return Err(LabError::Excitation(
            "degenerate excitation: lam_min(Sigma_tau) must be positive".into(),
        ));
    }
    let c_sys = (2.0 * t as f64 / (3.0 * tau as f64)) * sigma_t_op * sigma_t_op
        / (sigma_tau_min * sigma_tau_min);
    let t0 = 1152.0
        * tau as f64
        * k2.max(1.0)
        * (dims as f64 * c_sys.ln() + (1.0 / delta).ln());
    let mut report = BoundReport::quantity(
        "arx_burn_in",
        t0,
        vec![
            ("t", t as f64),
            ("delta", delta),
            ("tau", tau as f64),
            ("k2", k2),
            ("dims", dims as f64),
            ("sigma_t_op", sigma_t_op),
            ("sigma_tau_min", sigma_tau_min),
            ("c_sys", c_sys),
        ],
    );
    report.valid = t as f64 >= t0;
    Ok(report)
}

/// Smallest horizon satisfying its own burn-in:
/// `T_pe = min { t >= tau : t >= T0(t, delta, tau) }`, found by scanning `t`
/// upward while updating the exact covariance recursion one step at a time.
pub fn arx_t_pe(sys: &ArxSystem, noise: &NoiseSpec, delta: f64, tau: usize) -> Result<usize> {
    check_delta(delta)?;
    if tau < sys.p().max(sys.q()).max(1) {
        return Err(LabError::Contract(format!(
            "tau = {tau} must be at least the lag depth {}",
            sys.p().max(sys.q()).max(1)
        )));
    }
    let k2 = noise.variance_proxy_k2();
    let dims = sys.regressor_dim();
    let (a_cal, b_cal) = sys.companion_embed();
    let drive = &b_cal * sys.drive_covariance() * b_cal.transpose();
    let n = a_cal.nrows();
    let mut sigma = DMatrix::zeros(n, n);
    let mut sigma_tau_min = 0.0;
    for t in 1..=T_PE_SEARCH_CAP {
        sigma = symmetrize(&(&a_cal * &sigma * a_cal.transpose() + &drive));
        if t == tau {
            let (min_eig, _) = sym_eig_extremes(&sigma)?;
            if min_eig <= 0.0 {
                return Err(LabError::Excitation(
                    "degenerate excitation: Sigma_tau is singular".into(),
                ));
            }
            sigma_tau_min = min_eig;
        }
        if t >= tau {
            let sigma_t_op = operator_norm(&sigma);
            let report = arx_burn_in(t, delta, tau, k2, dims, sigma_t_op, sigma_tau_min)?;
            if report.valid {
                return Ok(t);
            }
        }
    }
    Err(LabError::Capacity(format!(
        "persistence-of-excitation search exceeded the cap of {T_PE_SEARCH_CAP}"
    )))
}

/// Squared operator-norm error bound
/// `(C / (SNR_tau T)) (dims log(dims/delta) + logdet_cond)`.
pub fn arx_error_bound(
    snr_tau: f64,
    t: usize,
    dims: usize,
    delta: f64,
    logdet_cond: f64,
    c: f64,
) -> Result<BoundReport> {
    check_delta(delta)?;
    if t == 0 || snr_tau <= 0.0 || c <= 0.0 {
        return Err(LabError::Contract("needs T >= 1, SNR > 0, C > 0".into()));
    }
    let value = (c / (snr_tau * t as f64))
        * (dims as f64 * (dims as f64 / delta).ln() + logdet_cond);
    Ok(BoundReport::quantity(
        "arx_error_bound",
        value,
        vec![
            ("snr_tau", snr_tau),
            ("t", t as f64),
            ("dims", dims as f64),
            ("delta", delta),
            ("logdet_cond", logdet_cond),
            ("c", c),
        ],
    ))
}

/// Upper-tail multiplier `dims / delta` from matrix Markov.
pub fn matrix_markov_factor(dims: usize, delta: f64) -> Result<BoundReport> {
    check_delta(delta)?;
    Ok(BoundReport::quantity(
        "matrix_markov_factor",
        dims as f64 / delta,
        vec![("dims", dims as f64), ("delta", delta)],
    ))
}

/// Polynomial bound on non-explosive matrix powers
/// `|A^k| <= (e k)^{d-1} max{M^d, 1}`.
pub fn power_norm_bound(k: usize, d: usize, m: f64) -> Result<BoundReport> {
    if k == 0 || d == 0 || m <= 0.0 {
        return Err(LabError::Contract("needs k >= 1, d >= 1, M > 0".into()));
    }
    let value = (E * k as f64).powi(d as i32 - 1) * m.powi(d as i32).max(1.0);
    Ok(BoundReport::quantity(
        "power_norm_bound",
        value,
        vec![("k", k as f64), ("d", d as f64), ("m", m)],
    ))
}

/// Logarithmic lag-depth rule `p = max(1, ceil(beta ln T))`.
pub fn ss_horizon(beta: f64, t: usize) -> Result<usize> {
    if beta <= 0.0 || t < 3 {
        return Err(LabError::Contract("needs beta > 0 and T >= 3".into()));
    }
    Ok(((beta * (t as f64).ln()).ceil() as usize).max(1))
}

/// Direct check of the truncation-bias condition
/// `|C A_cl^p| |Sigma_{X,T}| <= T^{-3}`.
pub fn ss_bias_ok(sys: &StateSpaceInnovation, p: usize, t: usize) -> Result<bool> {
    if p == 0 || t < 2 {
        return Err(LabError::Contract("needs p >= 1 and T >= 2".into()));
    }
    let a_cl = sys.a_cl();
    let mut power = DMatrix::identity(a_cl.nrows(), a_cl.ncols());
    for _ in 0..p {
        power = &a_cl * &power;
    }
    let bias_gain = operator_norm(&(sys.c() * power));
    let covs = sys.state_covariance_sequence(t);
    let cov_norm = operator_norm(covs.last().expect("nonempty sequence"));
    Ok(bias_gain * cov_norm <= (t as f64).powi(-3))
}

/// Squared operator-norm error bound for the truncated regression:
/// `(C1 / (SNR T)) (p d_sum log(p d_sum / delta) + logdet_cond)`.
pub fn ss_error_bound(
    snr_pp: f64,
    t: usize,
    p: usize,
    d_sum: usize,
    delta: f64,
    logdet_cond: f64,
    c1: f64,
) -> Result<BoundReport> {
    check_delta(delta)?;
    if t == 0 || p == 0 || snr_pp <= 0.0 || c1 <= 0.0 {
        return Err(LabError::Contract("needs T, p >= 1, SNR > 0, C1 > 0".into()));
    }
    let dims = (p * d_sum) as f64;
    let value = (c1 / (snr_pp * t as f64)) * (dims * (dims / delta).ln() + logdet_cond);
    Ok(BoundReport::quantity(
        "ss_error_bound",
        value,
        vec![
            ("snr_pp", snr_pp),
            ("t", t as f64),
            ("p", p as f64),
            ("d_sum", d_sum as f64),
            ("delta", delta),
            ("logdet_cond", logdet_cond),
            ("c1", c1),
        ],
    ))
}

/// Sparse recovery bound `c sigma^2 (s log(p cond / s) + log(1/delta)) / T`
/// with burn-in `T/k >= c' sigma^2 (s (log cond + log(p/s)) + log(1/delta))`.
/// `valid` records the burn-in flag.
#[allow(clippy::too_many_arguments)]
pub fn sparse_bound(
    sigma2: f64,
    s: usize,
    p: usize,
    cond_sys: f64,
    delta: f64,
    t: usize,
    k: usize,
    c: f64,
    c_prime: f64,
) -> Result<BoundReport> {
    check_delta(delta)?;
    check_divides(t, k)?;
    if s == 0 || s > p {
        return Err(LabError::Contract(format!("sparsity {s} must lie in 1..={p}")));
    }
    if sigma2 <= 0.0 || cond_sys <= 0.0 || c <= 0.0 || c_prime <= 0.0 {
        return Err(LabError::Contract("needs positive sigma2, cond and constants".into()));
    }
    let (s_f, p_f) = (s as f64, p as f64);
    let log_inv_delta = (1.0 / delta).ln();
    let value = c * sigma2 * (s_f * (p_f * cond_sys / s_f).ln() + log_inv_delta) / t as f64;
    let burn_in_rhs =
        c_prime * sigma2 * (s_f * (cond_sys.ln() + (p_f / s_f).ln()) + log_inv_delta);
    let mut report = BoundReport::quantity(
        "sparse_bound",
        value,
        vec![
            ("sigma2", sigma2),
            ("s", s_f),
            ("p", p_f),
            ("cond_sys", cond_sys),
            ("delta", delta),
            ("t", t as f64),
            ("k", k as f64),
            ("c", c),
            ("c_prime", c_prime),
            ("burn_in_rhs", burn_in_rhs),
        ],
    );
    report.valid = (t as f64 / k as f64) >= burn_in_rhs;
    Ok(report)
}

/// Finite-class bound `16 sigma^2 (log|F| + log(2/delta)) / T` with burn-in
/// `T/k >= 4 cond_F^2 (log|F| + log(2/delta))`. `class_size` is real-valued so
/// callers may pass fractional effective cardinalities; `valid` records the
/// burn-in flag.
pub fn nonlinear_bound(
    sigma2: f64,
    class_size: f64,
    delta: f64,
    t: usize,
    k: usize,
    cond_f: f64,
) -> Result<BoundReport> {
    check_delta(delta)?;
    check_divides(t, k)?;
    if class_size < 1.0 || sigma2 <= 0.0 || cond_f < 1.0 {
        return Err(LabError::Contract(
            "needs class size >= 1, sigma2 > 0 and cond_F >= 1".into(),
        ));
    }
    let entropy = class_size.ln() + (2.0 / delta).ln();
    let value = 16.0 * sigma2 * entropy / t as f64;
    let burn_in_rhs = 4.0 * cond_f * cond_f * entropy;
    let mut report = BoundReport::quantity(
        "nonlinear_bound",
        value,
        vec![
            ("sigma2", sigma2),
            ("class_size", class_size),
            ("delta", delta),
            ("t", t as f64),
            ("k", k as f64),
            ("cond_f", cond_f),
            ("burn_in_rhs", burn_in_rhs),
        ],
    );
    report.valid = (t as f64 / k as f64) >= burn_in_rhs;
    Ok(report)
}

/// Empirical hypercontractivity ratio: `sqrt(E|f(X_t)|^4) / E|f(X_t)|^2`
/// maximized over class members and time indices, with expectations taken
/// across the supplied sample paths (all stacks must share a shape).
pub fn cond_f_empirical(class: &FiniteClass, stacks: &[DMatrix<f64>]) -> Result<f64> {
    if stacks.is_empty() {
        return Err(LabError::Contract("needs at least one sample path".into()));
    }
    let shape = stacks[0].shape();
    if stacks.iter().any(|s| s.shape() != shape) {
        return Err(LabError::Dimension("sample paths must share a shape".into()));
    }
    let trials = stacks.len() as f64;
    let mut worst: f64 = 1.0;
    for index in 0..class.cardinality() {
        for t in 0..shape.0 {
            let mut m2 = 0.0;
            let mut m4 = 0.0;
            for stack in stacks {
                let v = class.evaluate(index, &stack.row(t).transpose());
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(LabError::Evaluation(format!(
                        "member '{}' produced non-finite output",
                        class.member_names()[index]
                    )));
                }
                let n2 = v.norm_squared();
                m2 += n2;
                m4 += n2 * n2;
            }
            m2 /= trials;
            m4 /= trials;
            if m2 > 0.0 {
                worst = worst.max(m4.sqrt() / m2);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::arx::spectral_radius;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand::SeedableRng;

    #[test]
    fn gaussian_tail_values() {
        assert_eq!(gaussian_tail(0.0, 1.0).unwrap().value, 1.0);
        let sigma = 2.0;
        let r = gaussian_tail(sigma, sigma * sigma).unwrap();
        assert_relative_eq!(r.value, (-0.5_f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn hw_tail_zero_clamped() {
        let r = hw_tail(0.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.inputs["raw_value"], 2.0);
    }

    #[test]
    fn hw_tail_identity_at_120() {
        // linear regime dominates: 2 exp(-120 / (16 sqrt 2))
        let r = hw_tail(120.0, 1.0, 1.0, 1.0).unwrap();
        let expected = 2.0 * (-(120.0 / (16.0 * SQRT_2))).exp();
        assert_relative_eq!(r.value, expected, epsilon = 1e-14);
        assert_relative_eq!(r.value, 0.009947, epsilon = 1e-5);
    }

    #[test]
    fn hw_tail_continuous_at_regime_switch() {
        for (sigma2, f, op) in [(1.0, 1.0, 1.0), (2.0, 3.0, 1.5), (0.5, 10.0, 2.0)] {
            let s = hw_regime_switch(sigma2, f, op);
            let quad = s * s / (144.0 * sigma2 * sigma2 * f * f);
            let lin = s / (16.0 * SQRT_2 * sigma2 * op);
            assert_relative_eq!(quad, lin, epsilon = 1e-12);
        }
    }

    #[test]
    fn hw_mgf_values_and_range() {
        assert_eq!(hw_mgf_exponent(0.0, 1.0, 1.0, 1.0).unwrap().value, 0.0);
        let r = hw_mgf_exponent(0.05, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(r.value, 0.09, epsilon = 1e-14);
        let limit = 1.0 / (8.0 * SQRT_2);
        assert!(hw_mgf_exponent(limit, 1.0, 1.0, 1.0).is_ok());
        assert!(hw_mgf_exponent(limit * (1.0 + 1e-9), 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn covering_bound_values() {
        assert_relative_eq!(covering_cardinality_bound(2.0, 3).unwrap().value, 8.0);
        assert_eq!(covering_cardinality_bound(0.5, 0).unwrap().value, 1.0);
        assert_relative_eq!(covering_cardinality_bound(1e12, 4).unwrap().value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn spectrum_deviation_values() {
        let vacuous = spectrum_deviation_failure(0.0, 1.0, 1.0, 1.0, 1).unwrap();
        assert_eq!(vacuous.value, 1.0);
        assert!(vacuous.inputs["raw_value"] >= 1.0);
        // eps solving eps^2 = 576 (1 + log 18) gives failure e^{-1}
        let eps = (576.0 * (1.0 + 18.0_f64.ln())).sqrt();
        let r = spectrum_deviation_failure(eps, 1.0, 1.0, 1.0, 1).unwrap();
        assert_relative_eq!(r.value, (-1.0_f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn csys_all_ones() {
        let r = csys(1, 1, 1.0, 1.0, 1.0, 1.0).unwrap();
        let expected = 1.0 + 4.0 * SQRT_2 * (1.0 / 18.0 + 9.0);
        assert_relative_eq!(r.value, expected, epsilon = 1e-12);
        assert!((r.value - 52.22).abs() < 0.01);
        assert!(r.value >= 1.0);
        // monotone in T
        let r2 = csys(10, 1, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(r2.value > r.value);
        assert!(csys(1, 1, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn lower_tail_values() {
        let r = lower_tail_failure(576, 1, 1.0, 5, 1.0).unwrap();
        assert_relative_eq!(r.value, (-1.0_f64).exp(), epsilon = 1e-12);
        let r0 = lower_tail_failure(576, 2, 1.0, 0, 7.0).unwrap();
        assert_relative_eq!(r0.value, (-0.5_f64).exp(), epsilon = 1e-12);
        assert!(lower_tail_failure(577, 2, 1.0, 1, 1.0).is_err());
    }

    #[test]
    fn selfnorm_values() {
        let r = selfnorm_frobenius_bound(1, 1.0, 0.0, 0.3).unwrap();
        assert_relative_eq!(r.value, 2.0 * (1.0 / 0.3_f64).ln(), epsilon = 1e-12);
        let r2 = selfnorm_frobenius_bound(1, 1.0, 2.0, (-1.0_f64).exp()).unwrap();
        assert_relative_eq!(r2.value, 4.0, epsilon = 1e-12);
        let op = selfnorm_operator_bound(1, 1.0, 0.0, (-1.0_f64).exp()).unwrap();
        assert_relative_eq!(op.value, 8.0 * 5.0_f64.ln() + 8.0, epsilon = 1e-12);
        // sigma2 homogeneity
        let op4 = selfnorm_operator_bound(1, 4.0, 0.0, (-1.0_f64).exp()).unwrap();
        assert_relative_eq!(op4.value, 4.0 * op.value, epsilon = 1e-12);
    }

    #[test]
    fn snr_values() {
        let unit = snr(&SnrContext::new(1.0, 1.0, 1.0, 1).unwrap());
        assert_eq!(unit.value, 1.0);
        let halved = snr(&SnrContext::new(1.0, 2.0, 1.0, 1).unwrap());
        assert_eq!(halved.value, 0.5);
        assert!(SnrContext::new(0.0, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn snr_from_memoryless_arx_covariance() {
        // a = 0, sigma_W = sigma_u = 1, p = q = 1: Sigma_1 = I_2
        let sys = ArxSystem::scalar(&[0.0], &[0.0], 1.0, 1.0).unwrap();
        let covs = sys.covariance_sequence(1);
        let (min_eig, max_eig) = sym_eig_extremes(&covs[1]).unwrap();
        assert_relative_eq!(min_eig, 1.0, epsilon = 1e-12);
        assert_relative_eq!(max_eig, 1.0, epsilon = 1e-12);
        let ctx = SnrContext::new(min_eig, 1.0, 1.0, 1).unwrap();
        assert_relative_eq!(snr(&ctx).value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn arx_burn_in_standalone_arithmetic() {
        // independent evaluation: tau = K2 = 1, dims = 1, delta = 0.1,
        // Sigma ratios 1 gives C_sys = 2T/3 and
        // T0 = 1152 (ln(2T/3) + ln 10)
        let t = 100_000;
        let r = arx_burn_in(t, 0.1, 1, 1.0, 1, 1.0, 1.0).unwrap();
        let expected = 1152.0 * ((2.0 * t as f64 / 3.0).ln() + 10.0_f64.ln());
        assert_relative_eq!(r.value, expected, epsilon = 1e-10);
        assert!(r.valid);
        // delta near 1 shrinks T0
        let loose = arx_burn_in(t, 0.99, 1, 1.0, 1, 1.0, 1.0).unwrap();
        assert!(loose.value < r.value);
    }

    #[test]
    fn t_pe_is_a_fixed_point() {
        let sys = ArxSystem::scalar(&[0.0], &[], 1.0, 0.0).unwrap();
        let noise = NoiseSpec::gaussian();
        let tau = 1;
        let delta = 0.1;
        let t_pe = arx_t_pe(&sys, &noise, delta, tau).unwrap();
        let covs = sys.covariance_sequence(t_pe);
        let (tau_min, _) = sym_eig_extremes(&covs[tau]).unwrap();
        let at = |t: usize| {
            let op = operator_norm(&covs[t]);
            arx_burn_in(t, delta, tau, 1.0, 1, op, tau_min).unwrap()
        };
        assert!(at(t_pe).valid);
        assert!(!at(t_pe - 1).valid);
    }

    #[test]
    fn arx_error_bound_all_ones() {
        let r = arx_error_bound(1.0, 1, 1, (-1.0_f64).exp(), 1.0, 128.0).unwrap();
        assert_relative_eq!(r.value, 256.0, epsilon = 1e-10);
        let r2 = arx_error_bound(1.0, 2, 1, (-1.0_f64).exp(), 1.0, 128.0).unwrap();
        assert_relative_eq!(r2.value, 128.0, epsilon = 1e-10);
    }

    #[test]
    fn matrix_markov_values() {
        assert_relative_eq!(matrix_markov_factor(3, 0.1).unwrap().value, 30.0);
        assert!(matrix_markov_factor(3, 1.0).is_err());
    }

    #[test]
    fn power_norm_values() {
        assert_eq!(power_norm_bound(5, 1, 0.5).unwrap().value, 1.0);
        assert_eq!(power_norm_bound(5, 1, 2.0).unwrap().value, 2.0);
        assert_relative_eq!(power_norm_bound(2, 2, 1.0).unwrap().value, 2.0 * E, epsilon = 1e-12);
    }

    #[test]
    fn power_norm_dominates_random_companions() {
        // random non-explosive companion matrices, all powers to k = 100
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let d = rng.gen_range(1..=3);
            let mut coeffs: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sys = loop {
                match ArxSystem::scalar(&coeffs, &[], 1.0, 0.0) {
                    Ok(s) => break s,
                    Err(_) => coeffs.iter_mut().for_each(|c| *c *= 0.5),
                }
            };
            let a = sys.companion_top_left();
            if spectral_radius(&a).unwrap() > 1.0 {
                continue;
            }
            let m = operator_norm(&a).max(1e-12);
            let mut power = DMatrix::identity(d, d);
            for k in 1..=100 {
                power = &a * &power;
                let bound = power_norm_bound(k, d, m).unwrap().value;
                assert!(
                    operator_norm(&power) <= bound * (1.0 + 1e-9),
                    "violated at d={d} k={k}"
                );
            }
        }
    }

    #[test]
    fn ss_horizon_values() {
        assert_eq!(ss_horizon(0.01, 3).unwrap(), 1);
        let t = (5.0_f64).exp().round() as usize;
        assert_eq!(ss_horizon(2.0, t).unwrap(), 10);
    }

    #[test]
    fn ss_bias_zero_closed_loop() {
        // A = F C with C = 1 makes A_cl = 0; bias vanishes for any p
        let sys = StateSpaceInnovation::new(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::zeros(1, 0),
            DMatrix::identity(1, 1),
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::identity(1, 1),
            0.0,
        )
        .unwrap();
        assert!(ss_bias_ok(&sys, 1, 10).unwrap());
    }

    #[test]
    fn ss_error_bound_all_ones() {
        let r = ss_error_bound(1.0, 1, 1, 1, (-1.0_f64).exp(), 1.0, 128.0).unwrap();
        assert_relative_eq!(r.value, 256.0, epsilon = 1e-10);
    }

    #[test]
    fn sparse_bound_arithmetic() {
        let r = sparse_bound(1.0, 2, 8, E, (-1.0_f64).exp(), 1000, 1, 1.0, 1.0).unwrap();
        let expected = (2.0 * (1.0 + 4.0_f64.ln()) + 1.0) / 1000.0;
        assert_relative_eq!(r.value, expected, epsilon = 1e-12);
        assert!(sparse_bound(1.0, 2, 8, E, 0.5, 1001, 2, 1.0, 1.0).is_err());
    }

    #[test]
    fn nonlinear_bound_arithmetic() {
        let r = nonlinear_bound(1.0, E, 2.0 / E, 32, 1, 1.0).unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-12);
        // singleton class: entropy reduces to log(2/delta)
        let single = nonlinear_bound(1.0, 1.0, 0.5, 16, 1, 1.0).unwrap();
        assert_relative_eq!(single.value, 16.0 * 4.0_f64.ln() / 16.0, epsilon = 1e-12);
    }

    #[test]
    fn cond_f_bounded_below_by_one() {
        use crate::estimators::FiniteClass;
        use nalgebra::DVector;
        let class = FiniteClass::new(vec![(
            "identity".into(),
            Box::new(|x: &DVector<f64>| x.clone()) as Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
        )])
        .unwrap();
        let stacks: Vec<DMatrix<f64>> = (0..50)
            .map(|i| {
                let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(i);
                crate::systems::noise::sample_noise(
                    &crate::systems::noise::NoiseSpec::gaussian(),
                    4,
                    1,
                    &mut rng,
                )
            })
            .collect();
        let cond = cond_f_empirical(&class, &stacks).unwrap();
        assert!(cond >= 1.0);
        // scalar gaussian: sqrt(E x^4)/E x^2 = sqrt 3
        assert!((cond - 3.0_f64.sqrt()).abs() < 0.5);
    }

    #[test]
    fn bound_report_json_echo() {
        let r = hw_tail(1.0, 1.0, 1.0, 1.0).unwrap();
        let json = r.to_json().unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["name"], "hw_tail");
        assert!(parsed["inputs"]["raw_value"].is_number());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn tails_monotone_in_deviation(s in 0.0f64..50.0, bump in 0.001f64..10.0) {
            let g1 = gaussian_tail(s, 1.0).unwrap().value;
            let g2 = gaussian_tail(s + bump, 1.0).unwrap().value;
            prop_assert!(g2 <= g1 + 1e-15);
            let h1 = hw_tail(s, 1.0, 2.0, 1.0).unwrap().value;
            let h2 = hw_tail(s + bump, 1.0, 2.0, 1.0).unwrap().value;
            prop_assert!(h2 <= h1 + 1e-15);
            let s1 = spectrum_deviation_failure(s, 1.0, 1.0, 1.0, 2).unwrap().value;
            let s2 = spectrum_deviation_failure(s + bump, 1.0, 1.0, 1.0, 2).unwrap().value;
            prop_assert!(s2 <= s1 + 1e-15);
        }

        #[test]
        fn sample_bounds_grow_as_delta_shrinks(d1 in 0.01f64..0.5, shrink in 0.1f64..0.9) {
            let d2 = d1 * shrink;
            prop_assert!(
                selfnorm_frobenius_bound(2, 1.0, 3.0, d2).unwrap().value
                    >= selfnorm_frobenius_bound(2, 1.0, 3.0, d1).unwrap().value
            );
            prop_assert!(
                arx_error_bound(1.0, 100, 3, d2, 1.0, 128.0).unwrap().value
                    >= arx_error_bound(1.0, 100, 3, d1, 1.0, 128.0).unwrap().value
            );
            prop_assert!(
                arx_burn_in(100, d2, 1, 1.0, 1, 1.0, 1.0).unwrap().value
                    >= arx_burn_in(100, d1, 1, 1.0, 1, 1.0, 1.0).unwrap().value
            );
        }

        #[test]
        fn evaluators_are_pure(s in 0.0f64..100.0) {
            let a = hw_tail(s, 1.3, 2.0, 1.1).unwrap().value;
            let b = hw_tail(s, 1.3, 2.0, 1.1).unwrap().value;
            prop_assert!(a.to_bits() == b.to_bits());
        }
    }
}
