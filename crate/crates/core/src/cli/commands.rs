use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::ExperimentConfig;
use crate::appendix::{check_norm_power_inequality, cp_dp, recursion_bound_trace};
use crate::asymptotics::{
    clt_ensemble, gamma_matrix, in_pool, rate_ensemble, replication_seed, solve_lyapunov, EnsembleOptions,
};
use crate::engine::{run, trace_csv_row, ReferencePoint, RunOptions, RunTrace, TRACE_CSV_HEADER};
use crate::error::{Error, Result};
use crate::linalg::frobenius;
use crate::problem::{check_assumptions, solve_minimizer, CheckOptions, FiniteSumProblem, NewtonOptions};

fn reference_minimizer(problem: &dyn FiniteSumProblem, cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    solve_minimizer(problem, NewtonOptions::with_tol(cfg.newton_tol, 100))
}

fn ensemble_options(cfg: &ExperimentConfig) -> EnsembleOptions {
    EnsembleOptions {
        workers: cfg.workers,
        init: cfg.init.clone(),
        bootstrap_resamples: cfg.bootstrap,
        burn_in: cfg.burn_in,
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Whether `values`, listed by increasing `keys`, never increase.
fn non_increasing(keys: &[f64], values: &[f64]) -> bool {
    let mut pairs: Vec<(f64, f64)> = keys.iter().copied().zip(values.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.windows(2).all(|w| w[1].1 <= w[0].1)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn cmd_run(cfg: &ExperimentConfig, dir: &Path) -> Result<Value> {
    let problem = cfg.problem.build()?;
    let problem = problem.as_ref();
    let schedule = cfg.schedule()?;
    let mut notes = Vec::new();
    let reference = match reference_minimizer(problem, cfg) {
        Ok(x) => Some(ReferencePoint::new(problem, &x)?),
        Err(e) => {
            notes.push(format!("no reference minimizer ({e}); reference-dependent columns are empty"));
            None
        }
    };

    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for &lambda in &cfg.lambdas {
        log::info!("run: lambda = {lambda}, {} replication(s) of {} steps", cfg.reps, cfg.iters);
        let traces: Vec<RunTrace> = in_pool(cfg.workers, || {
            (0..cfg.reps as u64)
                .into_par_iter()
                .map(|r| {
                    let opts = RunOptions {
                        lambda,
                        schedule,
                        n_iters: cfg.iters,
                        seed: replication_seed(cfg.seed, r),
                        diag_every: cfg.diag_every,
                        init: cfg.init.clone(),
                    };
                    run(problem, &opts, reference.as_ref()).map_err(|e| Error::Replication {
                        replication: r,
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })??;

        let file = format!("trace_lambda_{lambda}.csv");
        let mut w = create(&dir.join(&file))?;
        writeln!(w, "replication,{TRACE_CSV_HEADER}")?;
        for (r, t) in traces.iter().enumerate() {
            for s in &t.snapshots {
                writeln!(w, "{r},{}", trace_csv_row(s))?;
            }
        }
        w.flush()?;

        let finals: Vec<f64> = traces.iter().map(|t| t.last().grad_eval_norm).collect();
        let final_v: Vec<f64> = traces.iter().filter_map(|t| t.last().v).collect();
        let med = median(&finals);
        medians.push(med);
        rows.push(json!({
            "lambda": lambda,
            "trace_csv": file,
            "final_grad_eval_norm": finals,
            "median_final_grad_eval_norm": med,
            "mean_final_V": (!final_v.is_empty()).then(|| final_v.iter().sum::<f64>() / final_v.len() as f64),
        }));
    }

    Ok(json!({
        "problem": problem.describe(),
        "schedule": schedule,
        "iters": cfg.iters,
        "reps": cfg.reps,
        "per_lambda": rows,
        "grad_norm_non_increasing_in_lambda": non_increasing(&cfg.lambdas, &medians),
        "notes": notes,
    }))
}

pub fn cmd_clt(cfg: &ExperimentConfig, dir: &Path) -> Result<Value> {
    let schedule = cfg.schedule()?;
    if !schedule.is_harmonic() {
        return Err(Error::Config(format!(
            "c/alpha: the CLT holds for the step gamma_n = 1/n only (c = 1, alpha = 1); received c = {}, alpha = {}",
            schedule.c(),
            schedule.alpha()
        )));
    }
    let problem = cfg.problem.build()?;
    let problem = problem.as_ref();
    let x_ref = reference_minimizer(problem, cfg)?;
    let opts = ensemble_options(cfg);

    let mut notes = Vec::new();
    let theory = match problem.hessian(&x_ref) {
        Some(h) => Some((h, gamma_matrix(problem, &x_ref)?)),
        None => {
            notes.push("problem has no Hessian; theoretical covariance omitted".to_string());
            None
        }
    };

    let mut entries = Vec::new();
    let mut scaling = create(&dir.join("scaling.csv"))?;
    writeln!(
        scaling,
        "n,lambda,sigma2_scalar,stderr,ratio_to_lambda0,one_minus_lambda_sq,theory_sigma2_scalar"
    )?;
    let horizons = cfg.clt_horizons();
    let mut dirac_track = Vec::new();
    for &n in &horizons {
        let mut sigma0 = None;
        let mut lambdas = cfg.lambdas.clone();
        lambdas.sort_by(f64::total_cmp);
        for lambda in lambdas {
            log::info!("clt: lambda = {lambda}, n = {n}, M = {}", cfg.reps);
            let summary = clt_ensemble(problem, lambda, n, cfg.reps, cfg.seed, &x_ref, &opts)?;
            if lambda == 0.0 {
                sigma0 = Some(summary.sigma2_scalar);
            }
            if lambda == 1.0 {
                dirac_track.push((n, summary.sigma2_scalar));
            }
            let mut theory_json = Value::Null;
            let mut theory_sigma2 = None;
            if let Some((h, gamma)) = &theory {
                match solve_lyapunov(h, gamma, lambda) {
                    Ok(cov) => {
                        let s = cov.coordinate_sum_variance();
                        theory_sigma2 = Some(s);
                        let scale = frobenius(&cov.sigma);
                        let rel = (scale > 0.0).then(|| frobenius(&(&summary.sample_cov - &cov.sigma)) / scale);
                        theory_json = json!({
                            "sigma": crate::asymptotics::MatrixJson::from(&cov.sigma),
                            "sigma2_scalar": s,
                            "relative_frobenius_error": rel,
                            "lyapunov_residual": cov.residual(),
                        });
                    }
                    Err(e) => notes.push(format!("lambda = {lambda}: theoretical covariance unavailable ({e})")),
                }
            }
            let ratio = match sigma0 {
                Some(s0) if lambda < 1.0 && s0 > 0.0 => Some(summary.sigma2_scalar / s0),
                _ => None,
            };
            writeln!(
                scaling,
                "{n},{lambda},{},{},{},{},{}",
                summary.sigma2_scalar,
                summary.stderr,
                ratio.map(|r| r.to_string()).unwrap_or_default(),
                (1.0 - lambda) * (1.0 - lambda),
                theory_sigma2.map(|r| r.to_string()).unwrap_or_default(),
            )?;
            if cfg.dump_samples {
                let mut w = create(&dir.join(format!("samples_lambda_{lambda}_n_{n}.csv")))?;
                summary.write_samples_csv(&mut w)?;
                w.flush()?;
            }
            let mut entry = serde_json::to_value(&summary)?;
            entry["ratio_to_lambda0"] = json!(ratio);
            entry["theory"] = theory_json;
            entries.push(entry);
        }
    }
    scaling.flush()?;

    let dirac = if dirac_track.is_empty() {
        Value::Null
    } else {
        json!({
            "note": "at lambda = 1 the limit is a point mass; sigma2_scalar should shrink with n and no ratio is asserted",
            "sigma2_scalar_by_n": dirac_track,
            "decreasing_in_n": dirac_track.windows(2).all(|w| w[1].1 < w[0].1),
        })
    };
    Ok(json!({
        "problem": problem.describe(),
        "x_ref": x_ref,
        "summaries": entries,
        "dirac_limit": dirac,
        "notes": notes,
    }))
}

pub fn cmd_rates(cfg: &ExperimentConfig, dir: &Path) -> Result<Value> {
    let schedule = cfg.schedule()?;
    let problem = cfg.problem.build()?;
    let problem = problem.as_ref();
    let x_ref = reference_minimizer(problem, cfg)?;
    let (mu, mu_source) = match cfg.mu {
        Some(mu) => (mu, "config"),
        None if cfg.problem.is_quadratic() => (1.0, "quadratic: identity Hessian"),
        None => {
            let report = check_assumptions(
                problem,
                Some(&x_ref),
                &CheckOptions {
                    p_list: vec![1],
                    sample_count: cfg.sample_count,
                    sample_scale: 1.0,
                    seed: cfg.seed,
                },
            )?;
            (report.mu_estimate, "sampled restricted-secant estimate")
        }
    };
    let checkpoints = cfg.rate_checkpoints()?;
    let opts = ensemble_options(cfg);

    let mut w = create(&dir.join("rates.csv"))?;
    writeln!(w, "lambda,p,n,epoch,moment,value_gap_moment,scaled_moment")?;
    let mut estimates = Vec::new();
    let mut ordering = Vec::new();
    for &p in &cfg.p_list {
        let mut finals = Vec::new();
        for &lambda in &cfg.lambdas {
            log::info!("rates: lambda = {lambda}, p = {p}, M = {}", cfg.reps);
            let est = rate_ensemble(
                problem,
                lambda,
                &schedule,
                p,
                &checkpoints,
                cfg.reps,
                cfg.seed,
                &x_ref,
                Some(mu),
                &opts,
            )?;
            for (i, &n) in est.checkpoints.iter().enumerate() {
                let epoch = cfg.epoch_size.map(|e| (n as f64 / e as f64).to_string()).unwrap_or_default();
                writeln!(
                    w,
                    "{lambda},{p},{n},{epoch},{},{},{}",
                    est.moments[i], est.value_gap_moments[i], est.scaled_moments[i]
                )?;
            }
            finals.push(*est.moments.last().expect("at least two checkpoints"));
            estimates.push(est);
        }
        ordering.push(json!({
            "p": p,
            "final_moments": finals,
            "non_increasing_in_lambda": non_increasing(&cfg.lambdas, &finals),
        }));
    }
    w.flush()?;

    Ok(json!({
        "problem": problem.describe(),
        "mu": mu,
        "mu_source": mu_source,
        "checkpoints": checkpoints,
        "estimates": estimates,
        "ordering": ordering,
    }))
}

pub fn cmd_check(cfg: &ExperimentConfig, _dir: &Path) -> Result<Value> {
    let problem = cfg.problem.build()?;
    let problem = problem.as_ref();
    let x_ref = reference_minimizer(problem, cfg)?;
    let report = check_assumptions(
        problem,
        Some(&x_ref),
        &CheckOptions {
            p_list: cfg.p_list.clone(),
            sample_count: cfg.sample_count,
            sample_scale: 1.0,
            seed: cfg.seed,
        },
    )?;
    Ok(json!({
        "problem": problem.describe(),
        "reference_minimizer": x_ref,
        "report": report,
    }))
}

/// Default recursion parameters for the plateau report.
const RECURSION: (f64, f64, f64, f64, f64, usize) = (1.0, 1.0, 1.0, 1.5, 1.0, 100_000);

pub fn cmd_lemmas(cfg: &ExperimentConfig, dir: &Path) -> Result<Value> {
    if cfg.max_p < 2 || cfg.max_p % 2 != 0 {
        return Err(Error::Config(format!(
            "max_p: must be an even integer >= 2, received {}",
            cfg.max_p
        )));
    }
    let table = (2..=cfg.max_p).step_by(2).map(cp_dp).collect::<Result<Vec<_>>>()?;
    let mut w = create(&dir.join("constants.csv"))?;
    writeln!(w, "p,C_p,D_p")?;
    for k in &table {
        writeln!(w, "{},{},{}", k.p, k.c_p, k.d_p)?;
    }
    w.flush()?;

    let mut checks = Vec::new();
    for p in [2u32, 4] {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ p as u64);
        let mut violations = 0usize;
        let mut min_slack = f64::INFINITY;
        for i in 0..cfg.pairs {
            let d = [1, 3, 10][i % 3];
            let mut draw = || -> Vec<f64> { (0..d).map(|_| StandardNormal.sample(&mut rng)).collect() };
            let (a, b) = (draw(), draw());
            let (holds, slack) = check_norm_power_inequality(&a, &b, p);
            violations += usize::from(!holds);
            min_slack = min_slack.min(slack);
        }
        checks.push(json!({
            "p": p,
            "pairs": cfg.pairs,
            "dims": [1, 3, 10],
            "violations": violations,
            "min_slack": min_slack,
        }));
    }

    let (a, b, alpha, beta, z1, n_max) = RECURSION;
    let trace = recursion_bound_trace(a, b, alpha, beta, z1, n_max)?;
    Ok(json!({
        "constants": table,
        "inequality_checks": checks,
        "recursion": {
            "a": a, "b": b, "alpha": alpha, "beta": beta, "z1": z1, "n_max": n_max,
            "sup_scaled": trace.sup_scaled,
            "tail_growth": trace.tail_growth,
            "plateaued": trace.plateaued,
            "final_z": trace.z.last(),
        },
    }))
}
