//! Asymptotic covariance of `sqrt(n) (X_n - x*)` under `gamma_n = 1/n`, and
//! Monte-Carlo ensembles used to check it along with the moment rates.

mod covariance;
mod ensemble;

pub use covariance::{
    gamma_matrix, min_eigenvalue, quadrature_covariance, required_horizon, solve_lyapunov, AsymptoticCovariance,
    MatrixJson, SYMMETRY_TOL,
};
pub use ensemble::{
    clt_ensemble, fit_log_log, log_checkpoints, rate_ensemble, replication_seed, summarize_samples, EnsembleOptions,
    MonteCarloSummary, RateEstimate,
};
pub(crate) use ensemble::in_pool;
