//! Finite-sum objectives `f(x) = (1/N) sum_k f_k(x)`.

mod assumptions;
mod dataset;
mod logistic;
mod newton;
mod quadratic;

pub use assumptions::{check_assumptions, AssumptionFlags, AssumptionReport, CheckOptions, LpConstant};
pub(crate) use assumptions::tau_power;
pub use dataset::{load_dataset, DatasetFormat, LabelRule, LoadOptions};
pub use logistic::{logistic_hessian, sigmoid, softplus, LogisticProblem};
pub use newton::{solve_minimizer, NewtonOptions};
pub use quadratic::QuadraticProblem;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A finite-sum objective with per-component values and gradients.
///
/// Component indices are zero-based. Implementations are immutable and are
/// read concurrently by ensemble workers.
pub trait FiniteSumProblem: Send + Sync {
    /// Number of components `N`.
    fn num_components(&self) -> usize;

    /// Dimension `d` of the parameter space.
    fn dim(&self) -> usize;

    fn component_value(&self, k: usize, x: &[f64]) -> f64;

    /// Writes `grad f_k(x)` into `out` (length `d`).
    fn component_gradient_into(&self, k: usize, x: &[f64], out: &mut [f64]);

    fn component_gradient(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.component_gradient_into(k, x, &mut g);
        g
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.num_components();
        (0..n).map(|k| self.component_value(k, x)).sum::<f64>() / n as f64
    }

    fn full_gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.num_components();
        let mut acc = vec![0.0; self.dim()];
        let mut g = vec![0.0; self.dim()];
        for k in 0..n {
            self.component_gradient_into(k, x, &mut g);
            acc.iter_mut().zip(&g).for_each(|(a, v)| *a += v);
        }
        acc.iter_mut().for_each(|a| *a /= n as f64);
        acc
    }

    fn hessian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    /// Analytic minimizer, when the problem class has one.
    fn reference_minimizer(&self) -> Option<Vec<f64>> {
        None
    }

    /// Closed-form constant `L_p` of the order-`2p` gradient-difference bound.
    fn lipschitz_constant_p(&self, p: u32) -> Result<f64> {
        let _ = p;
        Err(Error::NoClosedForm(format!("L_p of {}", self.name())))
    }

    fn name(&self) -> &'static str;

    /// JSON description written into run metadata.
    fn describe(&self) -> serde_json::Value;
}

pub(crate) fn check_dim(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        });
    }
    Ok(())
}
