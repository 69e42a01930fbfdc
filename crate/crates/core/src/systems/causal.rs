//! The causal (block Toeplitz) operator mapping stacked driving noise to
//! stacked covariates, and its block-diagonal (decoupled/restarted) reduction.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};
use crate::numerics::operator_norm;

/// Lower block triangular Toeplitz operator with time-level blocks
/// `A^{s-t} B`, grouped into `(T/k) x (T/k)` blocks of size `dk x mk`.
#[derive(Debug, Clone)]
pub struct CausalOperator {
    /// `A^i B` for `i = 0..T`.
    markov: Vec<DMatrix<f64>>,
    state_dim: usize,
    drive_dim: usize,
    horizon: usize,
    block_len: usize,
}

impl CausalOperator {
    pub fn new(a_cal: &DMatrix<f64>, b_cal: &DMatrix<f64>, horizon: usize, block_len: usize) -> Result<Self> {
        if block_len == 0 || horizon == 0 || horizon % block_len != 0 {
            return Err(LabError::Contract(format!(
                "block length {block_len} must divide the horizon {horizon}"
            )));
        }
        if a_cal.nrows() != a_cal.ncols() || a_cal.nrows() != b_cal.nrows() {
            return Err(LabError::Dimension("A must be square and conform with B".into()));
        }
        let mut markov = Vec::with_capacity(horizon);
        let mut current = b_cal.clone();
        for _ in 0..horizon {
            markov.push(current.clone());
            current = a_cal * current;
        }
        Ok(CausalOperator {
            markov,
            state_dim: a_cal.nrows(),
            drive_dim: b_cal.ncols(),
            horizon,
            block_len,
        })
    }

    pub fn block_rows(&self) -> usize {
        self.horizon / self.block_len
    }

    /// Grouped block `(i, j)` of size `(d k) x (m k)`; strictly upper blocks
    /// are zero by causality.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let (d, m, k) = (self.state_dim, self.drive_dim, self.block_len);
        let mut out = DMatrix::zeros(d * k, m * k);
        if i < j {
            return out;
        }
        for r in 0..k {
            for c in 0..k {
                let s = i * k + r;
                let t = j * k + c;
                if s >= t {
                    out.view_mut((r * d, c * m), (d, m)).copy_from(&self.markov[s - t]);
                }
            }
        }
        out
    }

    /// Fully assembled dense operator, `(T d) x (T m)`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (d, m) = (self.state_dim, self.drive_dim);
        let mut out = DMatrix::zeros(self.horizon * d, self.horizon * m);
        for s in 0..self.horizon {
            for t in 0..=s {
                out.view_mut((s * d, t * m), (d, m)).copy_from(&self.markov[s - t]);
            }
        }
        out
    }

    /// Dense operator with every off-diagonal grouped block dropped — the
    /// decoupled operator generating the restarted process.
    pub fn block_diagonal_dense(&self) -> DMatrix<f64> {
        let (d, m, k) = (self.state_dim, self.drive_dim, self.block_len);
        let mut out = DMatrix::zeros(self.horizon * d, self.horizon * m);
        for s in 0..self.horizon {
            for t in 0..=s {
                if s / k == t / k {
                    out.view_mut((s * d, t * m), (d, m)).copy_from(&self.markov[s - t]);
                }
            }
        }
        out
    }

    /// `sigma_1` of the dense operator.
    pub fn operator_norm(&self) -> f64 {
        operator_norm(&self.to_dense())
    }

    /// `sigma_1` of the decoupled operator.
    pub fn block_diagonal_operator_norm(&self) -> f64 {
        operator_norm(&self.block_diagonal_dense())
    }

    /// Applies the operator to a stacked drive vector of length `T m`,
    /// returning the stacked covariates `X_{1:T}` of length `T d`.
    pub fn apply(&self, drive: &DVector<f64>) -> Result<DVector<f64>> {
        if drive.len() != self.horizon * self.drive_dim {
            return Err(LabError::Dimension(format!(
                "drive vector must have length {}, got {}",
                self.horizon * self.drive_dim,
                drive.len()
            )));
        }
        let (d, m) = (self.state_dim, self.drive_dim);
        let mut out = DVector::zeros(self.horizon * d);
        for s in 0..self.horizon {
            let mut acc = DVector::zeros(d);
            for t in 0..=s {
                acc += &self.markov[s - t] * drive.rows(t * m, m);
            }
            out.rows_mut(s * d, d).copy_from(&acc);
        }
        Ok(out)
    }
}
