//! Least-squares estimators: plain OLS, support-restricted sparse LSE, the
//! SSARX Markov-parameter regression and finite-class nonlinear least squares.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numerics::{operator_norm, pinv_with_rank, psd_sqrt, sym_eig_extremes, symmetrize};
use crate::systems::trajectory::{regressors, Trajectory};

pub const SPARSE_ENUMERATION_CAP: usize = 1_000_000;

/// Fitted parameter matrix together with the design diagnostics the bound
/// evaluators need to decide whether a certificate applies.
#[derive(Debug, Clone)]
pub struct Estimate {
    /// `d_Y x d_X` coefficient matrix.
    pub theta_hat: DMatrix<f64>,
    /// Normalized empirical covariance `(1/T) sum X_t X_t'`.
    pub emp_cov: DMatrix<f64>,
    pub rank: usize,
    pub min_eig: f64,
    pub support: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EstimateJson {
    theta_hat: Vec<f64>,
    shape: [usize; 2],
    rank: usize,
    min_eig: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    support: Option<Vec<usize>>,
}

impl Estimate {
    pub fn to_json(&self) -> Result<String> {
        let view = EstimateJson {
            theta_hat: self
                .theta_hat
                .row_iter()
                .flat_map(|r| r.iter().copied().collect::<Vec<_>>())
                .collect(),
            shape: [self.theta_hat.nrows(), self.theta_hat.ncols()],
            rank: self.rank,
            min_eig: self.min_eig,
            support: self.support.clone(),
        };
        serde_json::to_string_pretty(&view)
            .map_err(|e| LabError::Numeric(format!("estimate serialization failed: {e}")))
    }
}

/// Minimum-norm ordinary least squares over stacked rows. Rank deficiency is
/// never an error; the pseudo-inverse handles it and `rank`/`min_eig` let the
/// caller refuse to certify.
pub fn ols(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Estimate> {
    let horizon = x.nrows();
    if horizon == 0 || y.nrows() != horizon {
        return Err(LabError::Contract(format!(
            "regressor and target stacks must share a positive length (got {} and {})",
            horizon,
            y.nrows()
        )));
    }
    let gram = x.transpose() * x;
    let (gram_pinv, rank) = pinv_with_rank(&gram, None)?;
    let theta_hat = (y.transpose() * x) * gram_pinv;
    let emp_cov = symmetrize(&(&gram / horizon as f64));
    let (min_eig, _) = sym_eig_extremes(&emp_cov)?;
    if theta_hat.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Numeric("non-finite entries in fitted coefficients".into()));
    }
    Ok(Estimate { theta_hat, emp_cov, rank, min_eig, support: None })
}

fn restricted_residual(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    support: &[usize],
) -> Result<(DVector<f64>, f64)> {
    let x_s = x.select_columns(support.iter());
    let fit = ols(&x_s, &DMatrix::from_column_slice(y.len(), 1, y.as_slice()))?;
    let residual = y - &x_s * fit.theta_hat.transpose();
    Ok((fit.theta_hat.transpose().column(0).into_owned(), residual.norm_squared()))
}

/// Exact sparse least squares for scalar targets: exhaustive search over all
/// supports of cardinality at most `s`, restricted OLS on each. Among
/// equal-residual supports the lexicographically smallest wins.
pub fn sparse_lse(x: &DMatrix<f64>, y: &DVector<f64>, s: usize) -> Result<Estimate> {
    let p = x.ncols();
    if s == 0 || s > p {
        return Err(LabError::Contract(format!(
            "sparsity level {s} must lie in 1..={p}"
        )));
    }
    if x.nrows() != y.len() || x.nrows() == 0 {
        return Err(LabError::Contract("regressor and target stacks must conform".into()));
    }
    let mut total: usize = 0;
    for size in 1..=s {
        let mut c: usize = 1;
        for i in 0..size {
            c = c.saturating_mul(p - i) / (i + 1);
        }
        total = total.saturating_add(c);
        if total > SPARSE_ENUMERATION_CAP {
            return Err(LabError::Capacity(format!(
                "support enumeration would exceed the cap of {SPARSE_ENUMERATION_CAP}"
            )));
        }
    }
    let mut best: Option<(f64, Vec<usize>, DVector<f64>)> = None;
    for size in 1..=s {
        for support in (0..p).combinations(size) {
            let (coeffs, rss) = restricted_residual(x, y, &support)?;
            let better = match &best {
                None => true,
                Some((b_rss, b_sup, _)) => rss < *b_rss || (rss == *b_rss && support < *b_sup),
            };
            if better {
                best = Some((rss, support, coeffs));
            }
        }
    }
    let (_, support, coeffs) = best.expect("at least one support enumerated");
    let mut theta = DMatrix::zeros(1, p);
    for (slot, &col) in support.iter().enumerate() {
        theta[(0, col)] = coeffs[slot];
    }
    let horizon = x.nrows();
    let emp_cov = symmetrize(&(x.transpose() * x / horizon as f64));
    let (min_eig, _) = sym_eig_extremes(&emp_cov)?;
    let (_, rank) = pinv_with_rank(&(x.transpose() * x), None)?;
    Ok(Estimate { theta_hat: theta, emp_cov, rank, min_eig, support: Some(support) })
}

/// Markov-parameter regression: OLS on lagged outputs and inputs with equal
/// depth `p` on both halves.
pub fn ssarx_fit(traj: &Trajectory, p: usize) -> Result<Estimate> {
    if p == 0 {
        return Err(LabError::Contract("ssarx depth must be at least 1".into()));
    }
    let (x, y) = regressors(traj, p, p)?;
    ols(&x, &y)
}

type ClassFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Finite hypothesis class of named regression functions.
pub struct FiniteClass {
    members: Vec<(String, ClassFn)>,
}

impl FiniteClass {
    pub fn new(members: Vec<(String, ClassFn)>) -> Result<Self> {
        if members.is_empty() {
            return Err(LabError::Contract("hypothesis class must be nonempty".into()));
        }
        Ok(FiniteClass { members })
    }

    pub fn cardinality(&self) -> usize {
        self.members.len()
    }

    pub fn member_names(&self) -> Vec<&str> {
        self.members.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn evaluate(&self, index: usize, x: &DVector<f64>) -> DVector<f64> {
        (self.members[index].1)(x)
    }

    /// Mean squared empirical risk of one member over the stacked data.
    pub fn empirical_risk(&self, index: usize, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
        let horizon = x.nrows();
        let mut total = 0.0;
        for t in 0..horizon {
            let xt = x.row(t).transpose();
            let pred = self.evaluate(index, &xt);
            if pred.iter().any(|v| !v.is_finite()) {
                return Err(LabError::Evaluation(format!(
                    "member '{}' produced non-finite output",
                    self.members[index].0
                )));
            }
            total += (y.row(t).transpose() - pred).norm_squared();
        }
        Ok(total / horizon as f64)
    }
}

/// Picks the empirical-risk minimizer; ties go to the lowest member index.
pub fn finite_class_lse(
    class: &FiniteClass,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<(String, f64)> {
    if x.nrows() == 0 || x.nrows() != y.nrows() {
        return Err(LabError::Contract("regressor and target stacks must conform".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for index in 0..class.cardinality() {
        let risk = class.empirical_risk(index, x, y)?;
        if best.map_or(true, |(_, b)| risk < b) {
            best = Some((index, risk));
        }
    }
    let (index, risk) = best.expect("class is nonempty");
    Ok((class.members[index].0.clone(), risk))
}

/// Operator, Frobenius and (when a weight is given) weighted Frobenius norms
/// of the estimation error.
pub fn error_norms(
    theta_hat: &DMatrix<f64>,
    theta_star: &DMatrix<f64>,
    weight: Option<&DMatrix<f64>>,
) -> Result<(f64, f64, Option<f64>)> {
    if theta_hat.shape() != theta_star.shape() {
        return Err(LabError::Dimension(format!(
            "shape mismatch: {:?} vs {:?}",
            theta_hat.shape(),
            theta_star.shape()
        )));
    }
    let diff = theta_hat - theta_star;
    let op = operator_norm(&diff);
    let frob = diff.norm();
    let mahalanobis = match weight {
        None => None,
        Some(w) => {
            if w.nrows() != diff.ncols() {
                return Err(LabError::Dimension(
                    "weight must conform with the regressor dimension".into(),
                ));
            }
            let root = psd_sqrt(w)?;
            Some((&diff * root).norm())
        }
    };
    Ok((op, frob, mahalanobis))
}
