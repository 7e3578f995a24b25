//! Asymptotic covariance of `sqrt(n) (X_n - x*)` under `gamma_n = 1/n`:
//!
//! `Sigma = (1 - lambda)^2 int_0^inf exp(-(H - I/2) u)^T Gamma exp(-(H - I/2) u) du`
//!
//! with `H` the Hessian at `x*` and `Gamma = (1/N) sum_k grad f_k(x*) grad f_k(x*)^T`.
//! The integral is the unique solution of
//! `(H - I/2) Sigma + Sigma (H - I/2) = (1 - lambda)^2 Gamma`
//! whenever the smallest eigenvalue of `H` exceeds 1/2.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_symmetric, frobenius, norm, sym_eigen};
use crate::problem::{check_dim, FiniteSumProblem};

pub const SYMMETRY_TOL: f64 = 1e-10;

/// Row-major matrix with explicit dimensions, as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixJson {
    fn from(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl From<&MatrixJson> for DMatrix<f64> {
    fn from(m: &MatrixJson) -> Self {
        DMatrix::from_row_slice(m.rows, m.cols, &m.data)
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(h: &DMatrix<f64>) -> Result<f64> {
    ensure_symmetric(h, SYMMETRY_TOL)?;
    if h.nrows() == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    Ok(sym_eigen(h).0[0])
}

/// `Gamma = (1/N) sum_k grad f_k(x*) grad f_k(x*)^T`; `x_star` must be
/// stationary (`||grad f(x_star)|| <= 1e-8`).
pub fn gamma_matrix<P: FiniteSumProblem + ?Sized>(problem: &P, x_star: &[f64]) -> Result<DMatrix<f64>> {
    check_dim("x_star", problem.dim(), x_star.len())?;
    let grad_norm = norm(&problem.full_gradient(x_star));
    if grad_norm > 1e-8 {
        return Err(Error::NotStationary(grad_norm));
    }
    let d = problem.dim();
    let n = problem.num_components();
    let mut gamma = DMatrix::zeros(d, d);
    let mut g = vec![0.0; d];
    for k in 0..n {
        problem.component_gradient_into(k, x_star, &mut g);
        for i in 0..d {
            for j in i..d {
                gamma[(i, j)] += g[i] * g[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = gamma[(i, j)] / n as f64;
            gamma[(i, j)] = v;
            gamma[(j, i)] = v;
        }
    }
    Ok(gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCovariance {
    #[serde(with = "matrix_serde")]
    pub h: DMatrix<f64>,
    #[serde(with = "matrix_serde")]
    pub gamma: DMatrix<f64>,
    pub lambda: f64,
    #[serde(with = "matrix_serde")]
    pub sigma: DMatrix<f64>,
    pub rho: f64,
}

pub(crate) mod matrix_serde {
    use super::MatrixJson;
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let m = MatrixJson::deserialize(d)?;
        if m.data.len() != m.rows * m.cols {
            return Err(serde::de::Error::custom("matrix data length does not match dimensions"));
        }
        Ok(DMatrix::from(&m))
    }
}

pub(crate) use matrix_serde as matrix_json;

impl AsymptoticCovariance {
    /// Frobenius norm of `(H - I/2) Sigma + Sigma (H - I/2) - (1 - lambda)^2 Gamma`.
    pub fn residual(&self) -> f64 {
        let d = self.h.nrows();
        let shifted = &self.h - DMatrix::<f64>::identity(d, d) * 0.5;
        let lhs = &shifted * &self.sigma + &self.sigma * &shifted;
        let w = (1.0 - self.lambda).powi(2);
        frobenius(&(lhs - &self.gamma * w))
    }

    /// `1^T Sigma 1`, the limiting variance of the coordinate sum.
    pub fn coordinate_sum_variance(&self) -> f64 {
        self.sigma.iter().sum()
    }
}

fn check_inputs(h: &DMatrix<f64>, gamma: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidLambda(lambda));
    }
    ensure_symmetric(h, SYMMETRY_TOL)?;
    ensure_symmetric(gamma, SYMMETRY_TOL)?;
    check_dim("Gamma rows", h.nrows(), gamma.nrows())?;
    let rho = min_eigenvalue(h)?;
    if !(rho > 0.5) {
        return Err(Error::EigenvalueTooSmall(rho));
    }
    Ok(rho)
}

/// Solves the stationarity equation in the eigenbasis of `H`:
/// with `H = Q diag(l) Q^T` and `G = Q^T Gamma Q`,
/// `Sigma = (1 - lambda)^2 Q [G_ij / (l_i + l_j - 1)] Q^T`.
///
/// The `(1 - lambda)^2` factor is applied last, so `Sigma(lambda)` is exactly
/// `(1 - lambda)^2 Sigma(0)` element-wise.
pub fn solve_lyapunov(h: &DMatrix<f64>, gamma: &DMatrix<f64>, lambda: f64) -> Result<AsymptoticCovariance> {
    let rho = check_inputs(h, gamma, lambda)?;
    let (values, q) = sym_eigen(h);
    let g = q.transpose() * gamma * &q;
    let d = values.len();
    let rotated = DMatrix::from_fn(d, d, |i, j| g[(i, j)] / (values[i] + values[j] - 1.0));
    let base = &q * rotated * q.transpose();
    let base = (&base + base.transpose()) * 0.5;
    let w = (1.0 - lambda).powi(2);
    Ok(AsymptoticCovariance {
        h: h.clone(),
        gamma: gamma.clone(),
        lambda,
        sigma: base * w,
        rho,
    })
}

/// Horizon needed for the integrand tail `exp(-(2 rho - 1) u)` to drop below 1e-12.
pub fn required_horizon(rho: f64) -> f64 {
    1e12f64.ln() / (2.0 * rho - 1.0)
}

/// `exp(a)` by Taylor series after scaling `a` below norm 1/2, then squaring.
fn expm_taylor(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let size = frobenius(a);
    let mut squarings = 0u32;
    let mut scaled = a.clone();
    if size > 0.5 {
        squarings = (size / 0.5).log2().ceil() as u32;
        scaled /= 2f64.powi(squarings as i32);
    }
    let mut result = DMatrix::<f64>::identity(d, d);
    let mut term = DMatrix::<f64>::identity(d, d);
    for k in 1..=24 {
        term = &term * &scaled / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Composite Simpson quadrature of the covariance integral on `[0, horizon]`
/// with `steps` subintervals (rounded up to even). Independent of the
/// eigenbasis solve: `exp(-(H - I/2) h)` comes from a Taylor series and its
/// powers give the integrand on the grid.
pub fn quadrature_covariance(
    h: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    lambda: f64,
    horizon: f64,
    steps: usize,
) -> Result<DMatrix<f64>> {
    let rho = check_inputs(h, gamma, lambda)?;
    let required = required_horizon(rho);
    if !(horizon >= required) {
        return Err(Error::HorizonTooSmall { horizon, required });
    }
    let d = h.nrows();
    let w = (1.0 - lambda).powi(2);
    if w == 0.0 {
        return Ok(DMatrix::zeros(d, d));
    }
    let steps = (steps.max(2) + 1) / 2 * 2;
    let dt = horizon / steps as f64;
    let shifted = h - DMatrix::<f64>::identity(d, d) * 0.5;
    let step_exp = expm_taylor(&(-&shifted * dt));

    let mut e = DMatrix::<f64>::identity(d, d);
    let mut acc = DMatrix::<f64>::zeros(d, d);
    for j in 0..=steps {
        let weight = if j == 0 || j == steps {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += (e.transpose() * gamma * &e) * weight;
        e = &e * &step_exp;
    }
    let sigma = acc * (dt / 3.0) * w;
    Ok((&sigma + sigma.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::QuadraticProblem;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
    }

    #[test]
    fn gamma_matrix_examples() {
        let q = QuadraticProblem::new(vec![vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(gamma_matrix(&q, &[0.0]).unwrap()[(0, 0)], 1.0);
        let q = QuadraticProblem::new(vec![vec![1.0, 1.0], vec![-1.0, -1.0]]).unwrap();
        assert_eq!(gamma_matrix(&q, &[0.0, 0.0]).unwrap(), DMatrix::from_element(2, 2, 1.0));
        let single = QuadraticProblem::new(vec![vec![3.0, -2.0]]).unwrap();
        assert_eq!(gamma_matrix(&single, &[3.0, -2.0]).unwrap(), DMatrix::zeros(2, 2));
        assert!(matches!(gamma_matrix(&single, &[0.0, 0.0]), Err(Error::NotStationary(_))));
    }

    #[test]
    fn identity_hessian_closed_form() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        for lambda in [0.0, 0.3, 0.9] {
            let cov = solve_lyapunov(&DMatrix::identity(2, 2), &g, lambda).unwrap();
            let expected = &g * (1.0 - lambda).powi(2);
            assert!(frobenius(&(cov.sigma - expected)) < 1e-14);
        }
    }

    #[test]
    fn saga_limit_is_zero() {
        let h = DMatrix::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 0.9]);
        let cov = solve_lyapunov(&h, &DMatrix::identity(2, 2), 1.0).unwrap();
        assert!(cov.sigma.iter().all(|&v| v == 0.0));
        let quad = quadrature_covariance(&h, &DMatrix::identity(2, 2), 1.0, 100.0, 10).unwrap();
        assert!(quad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_small_eigenvalue_and_asymmetry() {
        let g = DMatrix::identity(2, 2);
        assert!(matches!(solve_lyapunov(&diag(&[0.4, 2.0]), &g, 0.0), Err(Error::EigenvalueTooSmall(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(solve_lyapunov(&asym, &g, 0.0), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn quadrature_scalar_integrals() {
        let q = quadrature_covariance(&DMatrix::identity(1, 1), &DMatrix::identity(1, 1), 0.0, 40.0, 4000).unwrap();
        assert!((q[(0, 0)] - 1.0).abs() < 1e-10);
        let q = quadrature_covariance(&diag(&[1.0, 2.0]), &DMatrix::identity(2, 2), 0.0, 40.0, 8000).unwrap();
        assert!((q[(0, 0)] - 1.0).abs() < 1e-10);
        assert!((q[(1, 1)] - 1.0 / 3.0).abs() < 1e-10);
        assert!(q[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn quadrature_horizon_guard() {
        let err = quadrature_covariance(&diag(&[0.6]), &DMatrix::identity(1, 1), 0.0, 40.0, 100).unwrap_err();
        match err {
            Error::HorizonTooSmall { required, .. } => assert!((required - required_horizon(0.6)).abs() < 1e-12),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert!((min_eigenvalue(&DMatrix::identity(3, 3)).unwrap() - 1.0).abs() < 1e-15);
        assert!((min_eigenvalue(&diag(&[0.4, 2.0])).unwrap() - 0.4).abs() < 1e-15);
        // trace/determinant oracle
        let (a, b, c): (f64, f64, f64) = (2.3, -0.7, 0.4);
        let m = DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
        let tr = a + c;
        let det = a * c - b * b;
        let expected = tr / 2.0 - ((tr * tr / 4.0) - det).sqrt();
        assert!((min_eigenvalue(&m).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn expm_matches_scalar_exponential() {
        let m = diag(&[-3.0, 0.5, 7.0]);
        let e = expm_taylor(&m);
        for (i, v) in [-3.0f64, 0.5, 7.0].iter().enumerate() {
            assert!((e[(i, i)] / v.exp() - 1.0).abs() < 1e-12);
        }
    }
}
