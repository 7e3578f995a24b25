use nalgebra::{DVector, Cholesky};

use super::FiniteSumProblem;
use crate::error::{Error, Result};
use crate::linalg::norm;

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Stop once `||grad f|| <= tol` and the Newton step is below `step_tol`.
    pub tol: f64,
    pub step_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            step_tol: 1e-6,
            max_iter: 100,
            max_halvings: 50,
        }
    }
}

impl NewtonOptions {
    pub fn with_tol(tol: f64, max_iter: usize) -> Self {
        NewtonOptions {
            tol,
            max_iter,
            ..Default::default()
        }
    }
}

/// Reference minimizer: the analytic one when the problem class has it,
/// otherwise damped Newton from the origin with step halving on value
/// increase.
///
/// Convergence needs a small gradient *and* a small Newton step. On separable
/// data the gradient decays along a ray while the Newton step stays of order
/// one, which surfaces as [`Error::NonConvergence`].
pub fn solve_minimizer(problem: &dyn FiniteSumProblem, opts: NewtonOptions) -> Result<Vec<f64>> {
    if let Some(x) = problem.reference_minimizer() {
        return Ok(x);
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, received {}", opts.tol)));
    }
    let d = problem.dim();
    let mut x = vec![0.0; d];
    let mut value = problem.value(&x);
    let mut grad = problem.full_gradient(&x);

    for iteration in 0..opts.max_iter {
        let hess = problem
            .hessian(&x)
            .ok_or_else(|| Error::NoClosedForm(format!("Hessian of {}", problem.name())))?;
        let chol = match Cholesky::new(hess) {
            Some(c) => c,
            None if iteration == 0 => return Err(Error::SingularHessian { iteration }),
            None => {
                return Err(Error::NonConvergence {
                    iterations: iteration,
                    grad_norm: norm(&grad),
                })
            }
        };
        let direction = chol.solve(&DVector::from_column_slice(&grad));
        let step_norm = direction.norm();
        if !step_norm.is_finite() {
            return Err(Error::SingularHessian { iteration });
        }
        if norm(&grad) <= opts.tol && step_norm <= opts.step_tol * (1.0 + norm(&x)) {
            return Ok(x);
        }

        let mut t = 1.0;
        let mut accepted = false;
        let grad_norm = norm(&grad);
        let noise = 1e-12 * value.abs().max(1.0);
        for _ in 0..=opts.max_halvings {
            let candidate: Vec<f64> = x.iter().zip(direction.iter()).map(|(xi, di)| xi - t * di).collect();
            let cv = problem.value(&candidate);
            // Close to the minimum the decrease drops below the resolution of
            // the objective; the gradient norm then decides.
            let cg = problem.full_gradient(&candidate);
            if cv < value || (cv <= value + noise && norm(&cg) < grad_norm) {
                x = candidate;
                value = cv;
                grad = cg;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No decrease along the Newton direction: round-off floor reached.
            if norm(&grad) <= opts.tol {
                return Ok(x);
            }
            return Err(Error::NonConvergence {
                iterations: iteration + 1,
                grad_norm: norm(&grad),
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        grad_norm: norm(&grad),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{LogisticProblem, QuadraticProblem};

    #[test]
    fn quadratic_uses_closed_form() {
        let q = QuadraticProblem::new(vec![vec![1.0, 2.0], vec![3.0, -2.0]]).unwrap();
        let x = solve_minimizer(&q, NewtonOptions::default()).unwrap();
        assert_eq!(x, vec![2.0, 0.0]);
        assert_eq!(q.full_gradient(&x), vec![0.0, 0.0]);
    }

    #[test]
    fn logistic_converges_to_small_gradient() {
        let p = LogisticProblem::synthetic(50, &[0.5, -0.5, 1.0, 0.0, 0.3], 1.0, 5).unwrap();
        let x = solve_minimizer(&p, NewtonOptions::default()).unwrap();
        assert!(norm(&p.full_gradient(&x)) <= 1e-10);
    }

    #[test]
    fn separable_data_does_not_converge() {
        let p = LogisticProblem::from_rows(vec![vec![1.0], vec![2.0], vec![0.5]], vec![1.0, 1.0, 1.0]).unwrap();
        let err = solve_minimizer(&p, NewtonOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }), "{err}");
    }

    #[test]
    fn aligned_separable_data_in_two_dims() {
        let p = LogisticProblem::from_rows(vec![vec![1.0, 1.0], vec![2.0, 2.0]], vec![1.0, 1.0]).unwrap();
        let err = solve_minimizer(&p, NewtonOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SingularHessian { .. } | Error::NonConvergence { .. }), "{err}");
    }
}
