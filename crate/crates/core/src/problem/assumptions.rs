//! Numerical probes of the structural assumptions at a reference minimizer.
//!
//! Closed-form constants are taken from the problem class. The secant
//! constant `mu` is a sampled estimate: it is a lower-bound probe over the
//! sampled points and not a certificate of the global inequality.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::FiniteSumProblem;
use crate::asymptotics::min_eigenvalue;
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, dot, norm, sub};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpConstant {
    pub p: u32,
    pub value: f64,
    /// `tau^{2p}(x) <= L_p ||x - x*||^{2p}` at every sampled point.
    pub spot_check_ok: bool,
    /// Largest observed `tau^{2p}(x) / ||x - x*||^{2p}`.
    pub max_observed_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionFlags {
    /// Gradient norm at the reference point below 1e-8.
    pub stationary_point: bool,
    /// `<x - x*, grad f(x)> > 0` at every sample.
    pub secant_positive: bool,
    pub l_bound: Option<bool>,
    /// `rho > 1/2`; absent without a Hessian.
    pub eigenvalue_above_half: Option<bool>,
    pub restricted_secant: bool,
    pub lp_bounds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[serde(rename = "L_p")]
    pub l_p: Vec<LpConstant>,
    pub rho: Option<f64>,
    pub mu_estimate: f64,
    pub gradient_norm_at_reference: f64,
    pub sample_count: usize,
    pub seed: u64,
    #[serde(rename = "satisfied")]
    pub satisfied_flags: AssumptionFlags,
}

/// Parameters of [`check_assumptions`].
#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub p_list: Vec<u32>,
    pub sample_count: usize,
    /// Sampled points are `x* + sample_scale * z` with `z ~ N(0, I)`.
    pub sample_scale: f64,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            p_list: vec![1, 2],
            sample_count: 1000,
            sample_scale: 1.0,
            seed: 0,
        }
    }
}

/// `tau^{2p}(x) = (1/N) sum_k ||grad f_k(x) - grad f_k(x*)||^{2p}`.
pub(crate) fn tau_power<P: FiniteSumProblem + ?Sized>(problem: &P, x: &[f64], grads_at_ref: &[Vec<f64>], p: u32) -> f64 {
    let mut g = vec![0.0; problem.dim()];
    let n = problem.num_components();
    let mut acc = 0.0;
    for (k, gref) in grads_at_ref.iter().enumerate() {
        problem.component_gradient_into(k, x, &mut g);
        acc += dist_sq(&g, gref).powi(p as i32);
    }
    acc / n as f64
}

pub fn check_assumptions(
    problem: &dyn FiniteSumProblem,
    x_star: Option<&[f64]>,
    opts: &CheckOptions,
) -> Result<AssumptionReport> {
    let x_star: Vec<f64> = match x_star {
        Some(x) => x.to_vec(),
        None => problem
            .reference_minimizer()
            .ok_or_else(|| Error::MissingMinimizer(format!("{} has no analytic minimizer", problem.name())))?,
    };
    super::check_dim("reference minimizer", problem.dim(), x_star.len())?;

    let grads_at_ref: Vec<Vec<f64>> = (0..problem.num_components())
        .map(|k| problem.component_gradient(k, &x_star))
        .collect();
    let grad_norm = norm(&problem.full_gradient(&x_star));
    let l = problem.lipschitz_constant_p(1).ok();
    let rho = match problem.hessian(&x_star) {
        Some(h) => Some(min_eigenvalue(&h)?),
        None => None,
    };

    let mut lp: Vec<LpConstant> = Vec::new();
    for &p in &opts.p_list {
        if p == 0 {
            return Err(Error::InvalidArgument("p must be at least 1".into()));
        }
        if let Ok(value) = problem.lipschitz_constant_p(p) {
            lp.push(LpConstant {
                p,
                value,
                spot_check_ok: true,
                max_observed_ratio: 0.0,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut mu_estimate = f64::INFINITY;
    let mut secant_positive = true;
    let mut l_ok = true;
    let mut sampled = 0usize;
    while sampled < opts.sample_count {
        let x: Vec<f64> = x_star
            .iter()
            .map(|c| c + opts.sample_scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let diff = sub(&x, &x_star);
        let v = dot(&diff, &diff);
        if v == 0.0 {
            continue;
        }
        sampled += 1;
        let secant = dot(&diff, &problem.full_gradient(&x));
        secant_positive &= secant > 0.0;
        mu_estimate = mu_estimate.min(secant / v);
        if let Some(l) = l {
            let tau2 = tau_power(problem, &x, &grads_at_ref, 1);
            l_ok &= tau2 <= l * v * (1.0 + 1e-12);
        }
        for c in lp.iter_mut() {
            let lhs = tau_power(problem, &x, &grads_at_ref, c.p);
            let rhs_unit = v.powi(c.p as i32);
            c.max_observed_ratio = c.max_observed_ratio.max(lhs / rhs_unit);
            c.spot_check_ok &= lhs <= c.value * rhs_unit * (1.0 + 1e-12);
        }
    }
    if !mu_estimate.is_finite() {
        mu_estimate = 0.0;
    }

    let flags = AssumptionFlags {
        stationary_point: grad_norm <= 1e-8,
        secant_positive,
        l_bound: l.map(|_| l_ok),
        eigenvalue_above_half: rho.map(|r| r > 0.5),
        restricted_secant: mu_estimate > 0.0,
        lp_bounds: if lp.is_empty() {
            None
        } else {
            Some(lp.iter().all(|c| c.spot_check_ok))
        },
    };
    Ok(AssumptionReport {
        l,
        l_p: lp,
        rho,
        mu_estimate: mu_estimate.max(0.0),
        gradient_norm_at_reference: grad_norm,
        sample_count: opts.sample_count,
        seed: opts.seed,
        satisfied_flags: flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{solve_minimizer, LogisticProblem, NewtonOptions, QuadraticProblem};

    #[test]
    fn quadratic_report() {
        let q = QuadraticProblem::seeded(12, 3, 1.0, 2).unwrap();
        let r = check_assumptions(&q, None, &CheckOptions::default()).unwrap();
        assert_eq!(r.l, Some(1.0));
        assert!(r.l_p.iter().all(|c| c.value == 1.0 && c.spot_check_ok));
        assert!((r.rho.unwrap() - 1.0).abs() < 1e-12);
        assert!((r.mu_estimate - 1.0).abs() < 1e-10);
        let f = &r.satisfied_flags;
        assert!(f.stationary_point && f.secant_positive && f.restricted_secant);
        assert_eq!(f.eigenvalue_above_half, Some(true));
    }

    #[test]
    fn logistic_requires_minimizer() {
        let p = LogisticProblem::synthetic(20, &[1.0, 0.0], 1.0, 1).unwrap();
        assert!(matches!(
            check_assumptions(&p, None, &CheckOptions::default()),
            Err(Error::MissingMinimizer(_))
        ));
    }

    #[test]
    fn logistic_bounds_hold_and_rho_scales() {
        let p = LogisticProblem::synthetic(40, &[0.3, -0.2, 0.1], 0.2, 9).unwrap();
        let xs = solve_minimizer(&p, NewtonOptions::default()).unwrap();
        let r = check_assumptions(&p, Some(&xs), &CheckOptions::default()).unwrap();
        assert_eq!(r.satisfied_flags.l_bound, Some(true));
        assert_eq!(r.satisfied_flags.lp_bounds, Some(true));
        // tiny features: curvature far below 1/2
        assert_eq!(r.satisfied_flags.eigenvalue_above_half, Some(false));

        let big = p.scaled(10.0);
        let xb = solve_minimizer(&big, NewtonOptions::default()).unwrap();
        let rb = check_assumptions(&big, Some(&xb), &CheckOptions::default()).unwrap();
        // x* scales by 1/10, so H(x*) scales by exactly 100.
        assert!((rb.rho.unwrap() / r.rho.unwrap() - 100.0).abs() < 1e-6);
    }

    #[test]
    fn json_field_names_are_stable() {
        let q = QuadraticProblem::seeded(3, 2, 1.0, 2).unwrap();
        let r = check_assumptions(&q, None, &CheckOptions { sample_count: 5, ..Default::default() }).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in ["L", "L_p", "rho", "mu_estimate", "satisfied"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
