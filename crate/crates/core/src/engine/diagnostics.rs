//! Convergence diagnostics relative to a reference minimizer `x*`:
//!
//! - `V_n = ||X_n - x*||^2`
//! - `A_n = (1/N) sum_k ||g_{n,k} - grad f_k(x*)||^2`
//! - `tau^2(x) = (1/N) sum_k ||grad f_k(x) - grad f_k(x*)||^2`
//! - `theta* = (1/N) sum_k ||grad f_k(x*)||^2`
//! - `T_n = V_n + 3 N gamma_{n-1}^2 A_n`
//!
//! `A_n` is read directly from the table rows, since `g_{n,k}` is the
//! gradient of `f_k` at the point where row `k` was last refreshed.

use serde::{Deserialize, Serialize};

use super::OptimizerState;
use crate::error::Result;
use crate::linalg::{dist_sq, norm, norm_sq};
use crate::problem::{check_dim, tau_power, FiniteSumProblem};
use crate::schedule::StepSchedule;

/// `x*` together with everything about it that diagnostics reuse.
#[derive(Debug, Clone)]
pub struct ReferencePoint {
    x: Vec<f64>,
    grads: Vec<Vec<f64>>,
    theta_star: f64,
    value: f64,
}

impl ReferencePoint {
    pub fn new<P: FiniteSumProblem + ?Sized>(problem: &P, x_ref: &[f64]) -> Result<Self> {
        check_dim("x_ref", problem.dim(), x_ref.len())?;
        let grads: Vec<Vec<f64>> = (0..problem.num_components())
            .map(|k| problem.component_gradient(k, x_ref))
            .collect();
        let theta_star = grads.iter().map(|g| norm_sq(g)).sum::<f64>() / grads.len() as f64;
        Ok(ReferencePoint {
            x: x_ref.to_vec(),
            grads,
            theta_star,
            value: problem.value(x_ref),
        })
    }

    pub fn point(&self) -> &[f64] {
        &self.x
    }

    /// `grad f_k(x*)`.
    pub fn component_gradient(&self, k: usize) -> &[f64] {
        &self.grads[k]
    }

    pub fn theta_star(&self) -> f64 {
        self.theta_star
    }

    /// `theta*_p = (1/N) sum_k ||grad f_k(x*)||^{2p}`.
    pub fn theta_star_p(&self, p: u32) -> f64 {
        self.grads.iter().map(|g| norm_sq(g).powi(p as i32)).sum::<f64>() / self.grads.len() as f64
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub(crate) fn grads(&self) -> &[Vec<f64>] {
        &self.grads
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSnapshot {
    pub n: u64,
    #[serde(rename = "V_n")]
    pub v: Option<f64>,
    #[serde(rename = "A_n")]
    pub a: Option<f64>,
    pub tau2: Option<f64>,
    #[serde(rename = "T_n")]
    pub t: Option<f64>,
    /// `||(1/N) sum_k g_{n,k}||`, available without a reference point.
    pub grad_eval_norm: f64,
    pub value_gap: Option<f64>,
}

impl DiagnosticsSnapshot {
    pub(crate) fn without_reference(state: &OptimizerState) -> Self {
        DiagnosticsSnapshot {
            n: state.n(),
            v: None,
            a: None,
            tau2: None,
            t: None,
            grad_eval_norm: norm(state.table().mean()),
            value_gap: None,
        }
    }
}

fn table_discrepancy(state: &OptimizerState, reference: &ReferencePoint, p: u32) -> f64 {
    let table = state.table();
    table
        .rows()
        .zip(reference.grads())
        .map(|(row, g)| dist_sq(row, g).powi(p as i32))
        .sum::<f64>()
        / table.num_rows() as f64
}

/// `gamma_{n-1}`, taken as `gamma_1` while `n = 1`.
fn previous_gamma(schedule: &StepSchedule, n: u64) -> f64 {
    schedule.gamma(n.saturating_sub(1).max(1))
}

pub fn diagnostics<P: FiniteSumProblem + ?Sized>(
    state: &OptimizerState,
    problem: &P,
    reference: &ReferencePoint,
    schedule: &StepSchedule,
) -> DiagnosticsSnapshot {
    let x = state.iterate();
    let v = dist_sq(x, reference.point());
    let a = table_discrepancy(state, reference, 1);
    let tau2 = tau_power(problem, x, reference.grads(), 1);
    let n_comp = problem.num_components() as f64;
    let g = previous_gamma(schedule, state.n());
    DiagnosticsSnapshot {
        n: state.n(),
        v: Some(v),
        a: Some(a),
        tau2: Some(tau2),
        t: Some(v + 3.0 * n_comp * g * g * a),
        grad_eval_norm: norm(state.table().mean()),
        value_gap: Some(problem.value(x) - reference.value()),
    }
}

/// Order-`2p` analogues of the diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HigherOrderSnapshot {
    pub n: u64,
    pub p: u32,
    /// `V_n^p`
    pub v_p: f64,
    /// `A_{p,n} = (1/N) sum_k ||g_{n,k} - grad f_k(x*)||^{2p}`
    pub a_p: f64,
    /// `tau^{2p}(X_n)`
    pub tau_2p: f64,
    pub theta_star_p: f64,
    /// `T_{p,n} = V_n^p + N e_p gamma_{n-1}^2 A_{p,n}` with
    /// `e_p = 3^{2p-1} 4^p + 3/p`.
    pub t_p: f64,
}

pub fn higher_order_diagnostics<P: FiniteSumProblem + ?Sized>(
    state: &OptimizerState,
    problem: &P,
    reference: &ReferencePoint,
    schedule: &StepSchedule,
    p: u32,
) -> HigherOrderSnapshot {
    assert!(p >= 1, "moment order starts at 1");
    let x = state.iterate();
    let v_p = dist_sq(x, reference.point()).powi(p as i32);
    let a_p = table_discrepancy(state, reference, p);
    let e_p = 3f64.powi(2 * p as i32 - 1) * 4f64.powi(p as i32) + 3.0 / p as f64;
    let g = previous_gamma(schedule, state.n());
    HigherOrderSnapshot {
        n: state.n(),
        p,
        v_p,
        a_p,
        tau_2p: tau_power(problem, x, reference.grads(), p),
        theta_star_p: reference.theta_star_p(p),
        t_p: v_p + problem.num_components() as f64 * e_p * g * g * a_p,
    }
}

/// Averages over every possible next draw `U_{n+1} = k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalExpectation {
    /// `E[A_{p,n+1} | F_n]`
    pub expected_a_next: f64,
    /// `E[Z_{n+1} | F_n]` with `Z_{n+1} = g_{n,U} - (1/N) sum_k g_{n,k}`.
    pub martingale_mean: Vec<f64>,
}

pub fn conditional_step_expectation<P: FiniteSumProblem + ?Sized>(
    state: &OptimizerState,
    problem: &P,
    reference: &ReferencePoint,
) -> ConditionalExpectation {
    conditional_step_expectation_p(state, problem, reference, 1)
}

/// Enumerates the `N` equally likely draws without touching `state`.
///
/// Drawing `k` replaces only row `k`, so the post-draw discrepancy is
/// `A_{p,n} + (||grad f_k(X_n) - grad f_k(x*)||^{2p} - ||g_{n,k} - grad f_k(x*)||^{2p}) / N`.
pub fn conditional_step_expectation_p<P: FiniteSumProblem + ?Sized>(
    state: &OptimizerState,
    problem: &P,
    reference: &ReferencePoint,
    p: u32,
) -> ConditionalExpectation {
    let table = state.table();
    let n = table.num_rows();
    let nf = n as f64;
    let d = table.dim();
    let a_now = table_discrepancy(state, reference, p);
    let mut fresh = vec![0.0; d];
    let mut expected_a = 0.0;
    for k in 0..n {
        problem.component_gradient_into(k, state.iterate(), &mut fresh);
        let g_ref = reference.component_gradient(k);
        let a_after = a_now + (dist_sq(&fresh, g_ref).powi(p as i32) - dist_sq(table.row(k), g_ref).powi(p as i32)) / nf;
        expected_a += a_after;
    }
    expected_a /= nf;

    // Z for draw k is row_k - m, so its average over the draws is
    // (sum_k row_k)/N - m. Taking m as the fully summed row mean (rather than
    // the incrementally maintained one) and accumulating the draws in the same
    // order makes the centering exact in floating point.
    let m = table.recomputed_mean();
    let mut drawn = vec![0.0; d];
    for k in 0..n {
        drawn.iter_mut().zip(table.row(k)).for_each(|(s, v)| *s += v);
    }
    let martingale_mean = drawn.iter().zip(&m).map(|(s, mi)| s / nf - mi).collect();

    ConditionalExpectation {
        expected_a_next: expected_a,
        martingale_mean,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{init_state, lambda_saga_step};
    use crate::problem::{LogisticProblem, NewtonOptions, QuadraticProblem, solve_minimizer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equilibrium_is_fixed_point() {
        let q = QuadraticProblem::seeded(6, 2, 1.0, 4).unwrap();
        let xs = q.minimizer();
        let r = ReferencePoint::new(&q, &xs).unwrap();
        let s = init_state(&q, &xs, &xs, 0).unwrap();
        let snap = diagnostics(&s, &q, &r, &StepSchedule::harmonic());
        assert_eq!(snap.v, Some(0.0));
        assert_eq!(snap.a, Some(0.0));
        assert_eq!(snap.tau2, Some(0.0));
        assert!(snap.grad_eval_norm < 1e-15);
    }

    #[test]
    fn scalar_example_values() {
        let q = QuadraticProblem::new(vec![vec![1.0], vec![-1.0]]).unwrap();
        let r = ReferencePoint::new(&q, &[0.0]).unwrap();
        let mut s2 = init_state(&q, &[2.0], &[2.0], 0).unwrap();
        let snap = diagnostics(&s2, &q, &r, &StepSchedule::harmonic());
        assert_eq!(snap.v, Some(4.0));
        assert_eq!(snap.tau2, Some(4.0));
        assert_eq!(snap.a, Some(4.0));
        assert_eq!(snap.t, Some(28.0));
        assert_eq!(r.theta_star(), 1.0);
        // n = 2 uses gamma_1 = 1; a negligible step keeps X and row 0 in place
        lambda_saga_step(&mut s2, &q, 0.0, 1e-300, 0).unwrap();
        let snap2 = diagnostics(&s2, &q, &r, &StepSchedule::harmonic());
        assert_eq!(snap2.n, 2);
        assert_eq!(snap2.t, Some(28.0));
    }

    #[test]
    fn enumeration_matches_closed_form() {
        let p = LogisticProblem::synthetic(25, &[0.4, -0.6, 0.2], 1.5, 8).unwrap();
        let xs = solve_minimizer(&p, NewtonOptions::default()).unwrap();
        let r = ReferencePoint::new(&p, &xs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = init_state(&p, &[1.0, 1.0, -1.0], &[0.5, 0.0, 0.0], 3).unwrap();
        for step in 0..200u64 {
            let gamma = 1.0 / (step + 1) as f64;
            let k = rng.random_range(0..25);
            lambda_saga_step(&mut s, &p, 0.7, gamma, k).unwrap();
            let snap = diagnostics(&s, &p, &r, &StepSchedule::harmonic());
            let ce = conditional_step_expectation(&s, &p, &r);
            let closed = snap.tau2.unwrap() / 25.0 + (1.0 - 1.0 / 25.0) * snap.a.unwrap();
            assert!((ce.expected_a_next - closed).abs() <= 1e-12 * closed.max(1.0));
            assert!(ce.martingale_mean.iter().all(|&v| v == 0.0));
            let hp = higher_order_diagnostics(&s, &p, &r, &StepSchedule::harmonic(), 2);
            let ce2 = conditional_step_expectation_p(&s, &p, &r, 2);
            let closed2 = hp.tau_2p / 25.0 + (1.0 - 1.0 / 25.0) * hp.a_p;
            assert!((ce2.expected_a_next - closed2).abs() <= 1e-12 * closed2.max(1.0));
            assert!(hp.t_p >= hp.v_p);
        }
    }

    #[test]
    fn settled_table_gives_tau_over_n() {
        let q = QuadraticProblem::seeded(8, 2, 1.0, 5).unwrap();
        let xs = q.minimizer();
        let r = ReferencePoint::new(&q, &xs).unwrap();
        let s = init_state(&q, &xs, &[3.0, -1.0], 0).unwrap();
        let snap = diagnostics(&s, &q, &r, &StepSchedule::harmonic());
        let ce = conditional_step_expectation(&s, &q, &r);
        assert_eq!(snap.a, Some(0.0));
        assert!((ce.expected_a_next - snap.tau2.unwrap() / 8.0).abs() < 1e-14);
    }
}
