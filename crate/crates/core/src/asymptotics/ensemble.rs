//! Monte-Carlo ensembles of independent λ-SAGA runs.
//!
//! Replication `r` uses seed `base_seed ^ r`. Replications run in parallel
//! on a rayon pool; results are collected in index order and aggregated
//! after sorting, so summaries do not depend on scheduling or on the
//! labelling of replications.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::covariance::matrix_json;
use crate::engine::{init_state, Initialization, OptimizerState};
use crate::error::{Error, Result};
use crate::linalg::dist_sq;
use crate::problem::{check_dim, FiniteSumProblem};
use crate::schedule::{validate_rate_conditions, RateConditionReport, StepSchedule};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleOptions {
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
    pub init: Initialization,
    /// Bootstrap resamples for the standard error of `sigma2_scalar`.
    pub bootstrap_resamples: usize,
    /// Checkpoints below this index are excluded from slope fits.
    pub burn_in: u64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            workers: None,
            init: Initialization::Zero,
            bootstrap_resamples: 1000,
            burn_in: 100,
        }
    }
}

pub fn replication_seed(base_seed: u64, replication: u64) -> u64 {
    base_seed ^ replication
}

pub(crate) fn in_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Advances `state` until it holds `X_target`.
fn advance_to<P: FiniteSumProblem + ?Sized>(
    state: &mut OptimizerState,
    problem: &P,
    lambda: f64,
    schedule: &StepSchedule,
    target: u64,
) -> Result<()> {
    while state.n() < target {
        let gamma = schedule.gamma(state.n());
        state.sampled_step(problem, lambda, gamma)?;
    }
    if state.iterate().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(state.n() - 1));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    #[serde(rename = "M")]
    pub m: usize,
    pub n: u64,
    pub lambda: f64,
    pub base_seed: u64,
    /// Ensemble mean of `sqrt(n) (X_n - x*)`.
    pub mean: Vec<f64>,
    #[serde(with = "matrix_json")]
    pub sample_cov: DMatrix<f64>,
    /// Sample variance of the coordinate sum of `sqrt(n) (X_n - x*)`.
    pub sigma2_scalar: f64,
    /// Bootstrap standard error of `sigma2_scalar`.
    pub stderr: f64,
    /// Per-replication `sqrt(n) (X_n - x*)`, in replication order.
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
}

impl MonteCarloSummary {
    pub fn write_samples_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        let d = self.mean.len();
        let header: Vec<String> = (0..d).map(|i| format!("z{i}")).collect();
        writeln!(out, "replication,{}", header.join(","))?;
        for (r, z) in self.samples.iter().enumerate() {
            let cells: Vec<String> = z.iter().map(f64::to_string).collect();
            writeln!(out, "{r},{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn sample_variance(values: &[f64]) -> f64 {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)
}

/// Aggregates `sqrt(n) (X_n - x*)` samples; input order does not matter.
pub fn summarize_samples(
    samples: Vec<Vec<f64>>,
    n: u64,
    lambda: f64,
    base_seed: u64,
    bootstrap_resamples: usize,
) -> Result<MonteCarloSummary> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::InvalidArgument("at least 2 replications required".into()));
    }
    let d = samples[0].len();
    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut mean = vec![0.0; d];
    for z in &sorted {
        mean.iter_mut().zip(z).for_each(|(s, v)| *s += v);
    }
    mean.iter_mut().for_each(|s| *s /= m as f64);
    let mut cov = DMatrix::zeros(d, d);
    for z in &sorted {
        for i in 0..d {
            for j in i..d {
                cov[(i, j)] += (z[i] - mean[i]) * (z[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / (m as f64 - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let h: Vec<f64> = sorted.iter().map(|z| z.iter().sum()).collect();
    let sigma2 = sample_variance(&h);

    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(1);
    let mut resample = vec![0.0; m];
    let boots: Vec<f64> = (0..bootstrap_resamples)
        .map(|_| {
            resample.iter_mut().for_each(|v| *v = h[rng.random_range(0..m)]);
            sample_variance(&resample)
        })
        .collect();
    let stderr = if boots.len() >= 2 { sample_variance(&boots).sqrt() } else { f64::NAN };

    Ok(MonteCarloSummary {
        m,
        n,
        lambda,
        base_seed,
        mean,
        sample_cov: cov,
        sigma2_scalar: sigma2,
        stderr,
        samples,
    })
}

/// `M` runs with `gamma_n = 1/n` to iterate index `n`, aggregating
/// `sqrt(n) (X_n - x_ref)`.
pub fn clt_ensemble<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    lambda: f64,
    n: u64,
    m: usize,
    base_seed: u64,
    x_ref: &[f64],
    opts: &EnsembleOptions,
) -> Result<MonteCarloSummary> {
    if m < 2 {
        return Err(Error::InvalidArgument("at least 2 replications required".into()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidLambda(lambda));
    }
    if n < 1 {
        return Err(Error::InvalidArgument("horizon n must be at least 1".into()));
    }
    check_dim("x_ref", problem.dim(), x_ref.len())?;
    let schedule = StepSchedule::harmonic();
    let (x0, x1) = opts.init.points(problem.dim())?;
    let scale = (n as f64).sqrt();

    let samples = in_pool(opts.workers, || {
        (0..m as u64)
            .into_par_iter()
            .map(|r| {
                let mut state = init_state(problem, &x0, &x1, replication_seed(base_seed, r))?;
                advance_to(&mut state, problem, lambda, &schedule, n).map_err(|e| Error::Replication {
                    replication: r,
                    source: Box::new(e),
                })?;
                Ok(state
                    .iterate()
                    .iter()
                    .zip(x_ref)
                    .map(|(x, s)| scale * (x - s))
                    .collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()
    })??;
    summarize_samples(samples, n, lambda, base_seed, opts.bootstrap_resamples)
}

/// Monte-Carlo estimate of `E ||X_n - x*||^{2p}` along a checkpoint grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateEstimate {
    pub p: u32,
    pub alpha: f64,
    pub c: f64,
    pub lambda: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub checkpoints: Vec<u64>,
    /// `E ||X_n - x*||^{2p}` per checkpoint.
    pub moments: Vec<f64>,
    /// `E (f(X_n) - f(x*))^p` per checkpoint.
    pub value_gap_moments: Vec<f64>,
    /// Least-squares slope of `log moment` against `log n` after burn-in.
    pub slope: Option<f64>,
    /// 95% half-width from the regression standard error.
    pub slope_ci: Option<f64>,
    pub value_gap_slope: Option<f64>,
    pub value_gap_slope_ci: Option<f64>,
    pub burn_in: u64,
    /// `moment * n^{p alpha}` per checkpoint.
    pub scaled_moments: Vec<f64>,
    /// Max over fitted checkpoints of `moment * n^{p alpha}` divided by its
    /// value at the first fitted checkpoint.
    pub bounded_ratio: Option<f64>,
    pub conditions: Option<RateConditionReport>,
    pub warnings: Vec<String>,
}

/// Slope fit of `(log x, log y)`: `(slope, 95% half-width)`.
pub fn fit_log_log(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::SlopeUndefined("mismatched lengths".into()));
    }
    if xs.len() < 2 {
        return Err(Error::SlopeUndefined(format!("need at least 2 points, got {}", xs.len())));
    }
    if let Some(bad) = ys.iter().chain(xs).find(|v| !(**v > 0.0)) {
        return Err(Error::SlopeUndefined(format!("nonpositive value {bad} cannot be log-transformed")));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::SlopeUndefined("checkpoints must differ".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let half_width = if lx.len() > 2 {
        let rss: f64 = lx
            .iter()
            .zip(&ly)
            .map(|(x, y)| {
                let r = y - (my + slope * (x - mx));
                r * r
            })
            .sum();
        1.96 * (rss / (k - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Ok((slope, half_width))
}

#[allow(clippy::too_many_arguments)]
pub fn rate_ensemble<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    lambda: f64,
    schedule: &StepSchedule,
    p: u32,
    checkpoints: &[u64],
    m: usize,
    base_seed: u64,
    x_ref: &[f64],
    mu: Option<f64>,
    opts: &EnsembleOptions,
) -> Result<RateEstimate> {
    if checkpoints.len() < 2 {
        return Err(Error::SlopeUndefined(format!(
            "need at least 2 checkpoints, got {}",
            checkpoints.len()
        )));
    }
    if checkpoints[0] < 1 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("checkpoints must be strictly increasing and at least 1".into()));
    }
    if m < 1 {
        return Err(Error::InvalidArgument("at least 1 replication required".into()));
    }
    if p < 1 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidLambda(lambda));
    }
    check_dim("x_ref", problem.dim(), x_ref.len())?;

    let mut warnings = Vec::new();
    let conditions = mu.map(|mu| validate_rate_conditions(schedule, mu, p));
    match &conditions {
        Some(c) => {
            let ok = if p == 1 { c.theorem3_ok } else { c.theorem4_ok };
            if !ok {
                warnings.push(format!("rate hypotheses not met for p = {p}; running anyway"));
                warnings.extend(c.messages.iter().cloned());
            }
        }
        None => warnings.push("mu not supplied; rate hypotheses unchecked".into()),
    }

    let f_star = problem.value(x_ref);
    let (x0, x1) = opts.init.points(problem.dim())?;
    let per_rep: Vec<(Vec<f64>, Vec<f64>)> = in_pool(opts.workers, || {
        (0..m as u64)
            .into_par_iter()
            .map(|r| {
                let mut state = init_state(problem, &x0, &x1, replication_seed(base_seed, r))?;
                let mut v = Vec::with_capacity(checkpoints.len());
                let mut gap = Vec::with_capacity(checkpoints.len());
                for &cp in checkpoints {
                    advance_to(&mut state, problem, lambda, schedule, cp).map_err(|e| Error::Replication {
                        replication: r,
                        source: Box::new(e),
                    })?;
                    v.push(dist_sq(state.iterate(), x_ref).powi(p as i32));
                    gap.push((problem.value(state.iterate()) - f_star).powi(p as i32));
                }
                Ok((v, gap))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let k = checkpoints.len();
    let mut moments = vec![0.0; k];
    let mut gap_moments = vec![0.0; k];
    for (v, g) in &per_rep {
        for i in 0..k {
            moments[i] += v[i];
            gap_moments[i] += g[i];
        }
    }
    moments.iter_mut().for_each(|s| *s /= m as f64);
    gap_moments.iter_mut().for_each(|s| *s /= m as f64);

    let exponent = p as f64 * schedule.alpha();
    let scaled: Vec<f64> = checkpoints
        .iter()
        .zip(&moments)
        .map(|(&n, mo)| mo * (n as f64).powf(exponent))
        .collect();

    let fit_idx: Vec<usize> = (0..k).filter(|&i| checkpoints[i] >= opts.burn_in).collect();
    let xs: Vec<f64> = fit_idx.iter().map(|&i| checkpoints[i] as f64).collect();
    let fit = |ys: &[f64], what: &str, warnings: &mut Vec<String>| -> (Option<f64>, Option<f64>) {
        let sel: Vec<f64> = fit_idx.iter().map(|&i| ys[i]).collect();
        match fit_log_log(&xs, &sel) {
            Ok((s, ci)) => (Some(s), Some(ci)),
            Err(e) => {
                warnings.push(format!("{what}: {e}"));
                (None, None)
            }
        }
    };
    let (slope, slope_ci) = fit(&moments, "moment slope", &mut warnings);
    let (gap_slope, gap_ci) = fit(&gap_moments, "value-gap slope", &mut warnings);
    let bounded_ratio = fit_idx.first().map(|&first| {
        let base = scaled[first];
        fit_idx.iter().map(|&i| scaled[i]).fold(f64::NEG_INFINITY, f64::max) / base
    });

    Ok(RateEstimate {
        p,
        alpha: schedule.alpha(),
        c: schedule.c(),
        lambda,
        m,
        checkpoints: checkpoints.to_vec(),
        moments,
        value_gap_moments: gap_moments,
        slope,
        slope_ci,
        value_gap_slope: gap_slope,
        value_gap_slope_ci: gap_ci,
        burn_in: opts.burn_in,
        scaled_moments: scaled,
        bounded_ratio,
        conditions,
        warnings,
    })
}

/// `count` log-spaced integer checkpoints in `[lo, hi]`, deduplicated.
pub fn log_checkpoints(lo: u64, hi: u64, count: usize) -> Vec<u64> {
    assert!(lo >= 1 && hi >= lo && count >= 1);
    if count == 1 {
        return vec![hi];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<u64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp().round() as u64)
        .collect();
    out.dedup();
    out
}
