//! λ-SAGA: a stochastic gradient method on finite sums that interpolates
//! between plain SGD (`lambda = 0`) and SAGA (`lambda = 1`), run with
//! decreasing steps `gamma_n = c / n^alpha`.
//!
//! The crate is organised as:
//!
//! - [`schedule`]: step schedules and the parameter checks for the rate theorems.
//! - [`problem`]: finite-sum objectives (quadratic, logistic), dataset loading,
//!   reference minimizers and assumption checks.
//! - [`engine`]: the gradient table, the update rule, runs and diagnostics.
//! - [`asymptotics`]: asymptotic covariance (Lyapunov solve and quadrature),
//!   Monte-Carlo CLT and rate ensembles.
//! - [`appendix`]: the norm-power inequality constants and the recursion bound.
//! - [`cli`]: the `lsaga` command-line front end.

pub mod appendix;
pub mod asymptotics;
pub mod cli;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod problem;
pub mod schedule;

pub use error::{Error, Result};
pub use schedule::{RateConditionReport, StepSchedule};
