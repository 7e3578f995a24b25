use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use super::{check_dim, FiniteSumProblem};
use crate::error::{Error, Result};
use crate::linalg::dist_sq;
use nalgebra::DMatrix;

/// `f_k(x) = ||x - a_k||^2 / 2`, so `grad f_k(x) = x - a_k`, the Hessian is
/// the identity and the minimizer is the mean anchor. Every structural
/// constant (`mu`, `L`, `L_p`, `rho`) equals 1.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    n: usize,
    d: usize,
    anchors: Vec<f64>,
    seed: Option<u64>,
}

impl QuadraticProblem {
    pub fn new(anchors: Vec<Vec<f64>>) -> Result<Self> {
        let n = anchors.len();
        if n == 0 {
            return Err(Error::InvalidArgument("at least one anchor required".into()));
        }
        let d = anchors[0].len();
        if d == 0 {
            return Err(Error::InvalidArgument("anchors must have positive dimension".into()));
        }
        for a in &anchors {
            check_dim("anchor", d, a.len())?;
        }
        Ok(QuadraticProblem {
            n,
            d,
            anchors: anchors.into_iter().flatten().collect(),
            seed: None,
        })
    }

    /// Anchors with i.i.d. `N(0, scale^2)` coordinates.
    pub fn seeded(n: usize, d: usize, scale: f64, seed: u64) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidArgument("N and d must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let anchors = (0..n * d)
            .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        Ok(QuadraticProblem {
            n,
            d,
            anchors,
            seed: Some(seed),
        })
    }

    pub fn anchor(&self, k: usize) -> &[f64] {
        &self.anchors[k * self.d..(k + 1) * self.d]
    }

    pub fn minimizer(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for k in 0..self.n {
            m.iter_mut().zip(self.anchor(k)).for_each(|(s, a)| *s += a);
        }
        m.iter_mut().for_each(|s| *s /= self.n as f64);
        m
    }
}

impl FiniteSumProblem for QuadraticProblem {
    fn num_components(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn component_value(&self, k: usize, x: &[f64]) -> f64 {
        0.5 * dist_sq(x, self.anchor(k))
    }

    #[inline]
    fn component_gradient_into(&self, k: usize, x: &[f64], out: &mut [f64]) {
        let a = self.anchor(k);
        for i in 0..self.d {
            out[i] = x[i] - a[i];
        }
    }

    fn hessian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(self.d, self.d))
    }

    fn reference_minimizer(&self) -> Option<Vec<f64>> {
        Some(self.minimizer())
    }

    fn lipschitz_constant_p(&self, p: u32) -> Result<f64> {
        if p == 0 {
            return Err(Error::InvalidArgument("p must be at least 1".into()));
        }
        Ok(1.0)
    }

    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "kind": "quadratic", "n": self.n, "d": self.d, "anchor_seed": self.seed })
    }
}
