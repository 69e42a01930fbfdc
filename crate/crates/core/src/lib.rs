//! Finite-sample system identification laboratory: simulators for linear and
//! small nonlinear time-series models, least-squares estimators, closed-form
//! non-asymptotic error bounds and seeded Monte Carlo verification of their
//! high-probability guarantees.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod numerics;
pub mod systems;

pub use error::{LabError, Result};
