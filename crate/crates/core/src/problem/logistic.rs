use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use super::{check_dim, FiniteSumProblem};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq};

/// Logistic function, evaluated on the branch that cannot overflow.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Binary logistic regression loss
/// `f_k(x) = log(1 + exp(<x, w_k>)) - y_k <x, w_k>`.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    n: usize,
    d: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    meta: serde_json::Value,
}

impl LogisticProblem {
    /// `features` row-major with `labels.len()` rows; labels must be 0 or 1.
    pub fn new(features: Vec<f64>, labels: Vec<f64>, d: usize) -> Result<Self> {
        let n = labels.len();
        if n == 0 || d == 0 {
            return Err(Error::InvalidArgument("N and d must be positive".into()));
        }
        check_dim("feature matrix length", n * d, features.len())?;
        if let Some(k) = labels.iter().position(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidArgument(format!(
                "label {} at row {} is not binary",
                labels[k],
                k + 1
            )));
        }
        Ok(LogisticProblem {
            n,
            d,
            features,
            labels,
            meta: json!({ "source": "in-memory" }),
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        for r in &rows {
            check_dim("feature row", d, r.len())?;
        }
        Self::new(rows.into_iter().flatten().collect(), labels, d)
    }

    /// Gaussian features `N(0, feature_scale^2 I)` and labels drawn from the
    /// logistic model at `x_true`.
    pub fn synthetic(n: usize, x_true: &[f64], feature_scale: f64, seed: u64) -> Result<Self> {
        let d = x_true.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features: Vec<f64> = (0..n * d)
            .map(|_| feature_scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let labels = (0..n)
            .map(|k| {
                let p = sigmoid(dot(&features[k * d..(k + 1) * d], x_true));
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let mut problem = Self::new(features, labels, d)?;
        problem.meta = json!({
            "source": "synthetic",
            "seed": seed,
            "feature_scale": feature_scale,
            "x_true": x_true,
        });
        Ok(problem)
    }

    pub fn with_metadata(mut self, meta: serde_json::Value) -> Self {
        self.meta = meta;
        self
    }

    /// Multiplies every feature by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.features.iter_mut().for_each(|v| *v *= factor);
        out.meta = json!({ "base": self.meta, "feature_scaling": factor });
        out
    }

    /// First `n` samples.
    pub fn subset(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n {
            return Err(Error::InvalidArgument(format!(
                "subset size {n} outside 1..={}",
                self.n
            )));
        }
        let mut out = Self::new(self.features[..n * self.d].to_vec(), self.labels[..n].to_vec(), self.d)?;
        out.meta = json!({ "base": self.meta, "subset": n });
        Ok(out)
    }

    pub fn feature(&self, k: usize) -> &[f64] {
        &self.features[k * self.d..(k + 1) * self.d]
    }

    pub fn label(&self, k: usize) -> f64 {
        self.labels[k]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// `p_k(x) = sigmoid(<x, w_k>)`.
    pub fn probability(&self, k: usize, x: &[f64]) -> f64 {
        sigmoid(dot(self.feature(k), x))
    }
}

/// `(1/N) sum_k p_k(x) (1 - p_k(x)) w_k w_k^T`.
pub fn logistic_hessian(problem: &LogisticProblem, x: &[f64]) -> Result<DMatrix<f64>> {
    check_dim("iterate", problem.d, x.len())?;
    let d = problem.d;
    let mut h = DMatrix::zeros(d, d);
    for k in 0..problem.n {
        let w = problem.feature(k);
        let t = dot(w, x);
        let weight = sigmoid(t) * sigmoid(-t);
        for i in 0..d {
            let wi = weight * w[i];
            for j in i..d {
                h[(i, j)] += wi * w[j];
            }
        }
    }
    let scale = 1.0 / problem.n as f64;
    for i in 0..d {
        for j in i..d {
            let v = h[(i, j)] * scale;
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

impl FiniteSumProblem for LogisticProblem {
    fn num_components(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn component_value(&self, k: usize, x: &[f64]) -> f64 {
        // Labels are 0 or 1; the mirrored form avoids cancellation at large margins.
        let t = dot(self.feature(k), x);
        if self.labels[k] == 1.0 {
            softplus(-t)
        } else {
            softplus(t)
        }
    }

    #[inline]
    fn component_gradient_into(&self, k: usize, x: &[f64], out: &mut [f64]) {
        let w = self.feature(k);
        let t = dot(w, x);
        let r = if self.labels[k] == 1.0 { -sigmoid(-t) } else { sigmoid(t) };
        for i in 0..self.d {
            out[i] = r * w[i];
        }
    }

    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        logistic_hessian(self, x).ok()
    }

    /// `L_p = (1 / (4^p N)) sum_k ||w_k||^{4p}`.
    fn lipschitz_constant_p(&self, p: u32) -> Result<f64> {
        if p == 0 {
            return Err(Error::InvalidArgument("p must be at least 1".into()));
        }
        let sum: f64 = (0..self.n)
            .map(|k| norm_sq(self.feature(k)).powi(2 * p as i32))
            .sum();
        Ok(sum / (4f64.powi(p as i32) * self.n as f64))
    }

    fn name(&self) -> &'static str {
        "logistic"
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "kind": "logistic", "n": self.n, "d": self.d, "data": self.meta })
    }
}
