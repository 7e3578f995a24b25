use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{diagnostics, init_state, DiagnosticsSnapshot, OptimizerState, ReferencePoint};
use crate::error::{Error, Result};
use crate::problem::{check_dim, FiniteSumProblem};
use crate::schedule::StepSchedule;

/// How `X_0` (table initialization point) and `X_1` (first iterate) are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Initialization {
    /// `X_0 = X_1 = 0`.
    Zero,
    /// Explicit points; `x1` defaults to `x0`.
    Point { x0: Vec<f64>, x1: Option<Vec<f64>> },
    /// Independent `N(0, scale^2 I)` draws for `X_0` and `X_1`.
    Gaussian { scale: f64, seed: u64 },
}

impl Default for Initialization {
    fn default() -> Self {
        Initialization::Zero
    }
}

impl Initialization {
    pub fn points(&self, d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            Initialization::Zero => Ok((vec![0.0; d], vec![0.0; d])),
            Initialization::Point { x0, x1 } => {
                check_dim("x0", d, x0.len())?;
                let x1 = x1.clone().unwrap_or_else(|| x0.clone());
                check_dim("x1", d, x1.len())?;
                Ok((x0.clone(), x1))
            }
            Initialization::Gaussian { scale, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut draw = || -> Vec<f64> {
                    (0..d)
                        .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                        .collect()
                };
                let x0 = draw();
                let x1 = draw();
                Ok((x0, x1))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub lambda: f64,
    pub schedule: StepSchedule,
    pub n_iters: u64,
    pub seed: u64,
    /// Snapshot cadence in steps.
    pub diag_every: u64,
    #[serde(default)]
    pub init: Initialization,
}

impl RunOptions {
    pub fn new(lambda: f64, schedule: StepSchedule, n_iters: u64, seed: u64) -> Self {
        RunOptions {
            lambda,
            schedule,
            n_iters,
            seed,
            diag_every: n_iters.max(1),
            init: Initialization::Zero,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidLambda(self.lambda));
        }
        if self.diag_every == 0 {
            return Err(Error::InvalidArgument("cadence must be positive (diag_every = 0)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunTrace {
    pub schedule: StepSchedule,
    pub lambda: f64,
    pub seed: u64,
    pub n_iters: u64,
    pub diag_every: u64,
    pub init: Initialization,
    pub problem: serde_json::Value,
    pub snapshots: Vec<DiagnosticsSnapshot>,
    pub final_iterate: Vec<f64>,
    pub wall_time_secs: f64,
}

pub const TRACE_CSV_HEADER: &str = "n,V_n,A_n,tau2,T_n,grad_eval_norm,value_gap";

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One CSV row matching [`TRACE_CSV_HEADER`]. Values print in shortest
/// round-trip form; reference-dependent cells are empty when no `x*` was
/// supplied.
pub fn trace_csv_row(s: &DiagnosticsSnapshot) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        s.n,
        cell(s.v),
        cell(s.a),
        cell(s.tau2),
        cell(s.t),
        s.grad_eval_norm,
        cell(s.value_gap)
    )
}

impl RunTrace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_CSV_HEADER}")?;
        for s in &self.snapshots {
            writeln!(out, "{}", trace_csv_row(s))?;
        }
        Ok(())
    }

    /// Everything except the snapshots.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "schedule": self.schedule,
            "lambda": self.lambda,
            "seed": self.seed,
            "n_iters": self.n_iters,
            "diag_every": self.diag_every,
            "init": self.init,
            "problem": self.problem,
            "final_iterate": self.final_iterate,
            "wall_time_secs": self.wall_time_secs,
        })
    }

    pub fn last(&self) -> &DiagnosticsSnapshot {
        self.snapshots.last().expect("a trace always holds the initial snapshot")
    }
}

fn snapshot<P: FiniteSumProblem + ?Sized>(
    state: &OptimizerState,
    problem: &P,
    reference: Option<&ReferencePoint>,
    schedule: &StepSchedule,
) -> Result<DiagnosticsSnapshot> {
    if state.iterate().iter().any(|v| !v.is_finite()) {
        return Err(Error::Run {
            iteration: state.n(),
            source: Box::new(Error::NonFinite(state.n() - 1)),
        });
    }
    Ok(match reference {
        Some(r) => diagnostics(state, problem, r, schedule),
        None => DiagnosticsSnapshot::without_reference(state),
    })
}

/// Runs `n_iters` steps, snapshotting at `n = 1` and every `diag_every`
/// steps (plus the final state).
pub fn run<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    opts: &RunOptions,
    reference: Option<&ReferencePoint>,
) -> Result<RunTrace> {
    run_with_observer(problem, opts, reference, |_| {})
}

/// [`run`] with a callback invoked on the state after every step.
pub fn run_with_observer<P, F>(
    problem: &P,
    opts: &RunOptions,
    reference: Option<&ReferencePoint>,
    mut observer: F,
) -> Result<RunTrace>
where
    P: FiniteSumProblem + ?Sized,
    F: FnMut(&OptimizerState),
{
    opts.validate()?;
    let d = problem.dim();
    if let Some(r) = reference {
        check_dim("reference point", d, r.point().len())?;
    }
    let start = Instant::now();
    let (x0, x1) = opts.init.points(d)?;
    let mut state = init_state(problem, &x0, &x1, opts.seed)?;
    let mut snapshots = vec![snapshot(&state, problem, reference, &opts.schedule)?];

    for step in 1..=opts.n_iters {
        let gamma = opts.schedule.gamma(state.n());
        state
            .sampled_step(problem, opts.lambda, gamma)
            .map_err(|e| Error::Run {
                iteration: state.n(),
                source: Box::new(e),
            })?;
        observer(&state);
        if step % opts.diag_every == 0 || step == opts.n_iters {
            snapshots.push(snapshot(&state, problem, reference, &opts.schedule)?);
        }
    }

    Ok(RunTrace {
        schedule: opts.schedule,
        lambda: opts.lambda,
        seed: opts.seed,
        n_iters: opts.n_iters,
        diag_every: opts.diag_every,
        init: opts.init.clone(),
        problem: problem.describe(),
        snapshots,
        final_iterate: state.iterate().to_vec(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::QuadraticProblem;

    #[test]
    fn zero_cadence_rejected() {
        let q = QuadraticProblem::seeded(4, 2, 1.0, 0).unwrap();
        let mut opts = RunOptions::new(0.5, StepSchedule::harmonic(), 10, 0);
        opts.diag_every = 0;
        let err = run(&q, &opts, None).unwrap_err().to_string();
        assert!(err.contains("cadence must be positive"), "{err}");
    }

    #[test]
    fn snapshots_strictly_increase() {
        let q = QuadraticProblem::seeded(4, 2, 1.0, 0).unwrap();
        let mut opts = RunOptions::new(0.5, StepSchedule::harmonic(), 105, 0);
        opts.diag_every = 10;
        let trace = run(&q, &opts, None).unwrap();
        let ns: Vec<u64> = trace.snapshots.iter().map(|s| s.n).collect();
        assert_eq!(ns.first(), Some(&1));
        assert_eq!(ns.last(), Some(&106));
        assert!(ns.windows(2).all(|w| w[0] < w[1]));
        assert!(trace.snapshots.iter().all(|s| s.v.is_none()));
    }

    #[test]
    fn csv_round_trips_values() {
        let q = QuadraticProblem::seeded(4, 2, 1.0, 0).unwrap();
        let r = ReferencePoint::new(&q, &q.minimizer()).unwrap();
        let mut opts = RunOptions::new(1.0, StepSchedule::harmonic(), 50, 3);
        opts.diag_every = 25;
        let trace = run(&q, &opts, Some(&r)).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TRACE_CSV_HEADER));
        let last: Vec<f64> = lines.last().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
        let s = trace.last();
        assert_eq!(last[1], s.v.unwrap());
        assert_eq!(last[5], s.grad_eval_norm);
    }

    #[test]
    fn gaussian_init_is_recorded_and_reproducible() {
        let init = Initialization::Gaussian { scale: 2.0, seed: 9 };
        let (a0, a1) = init.points(3).unwrap();
        let (b0, b1) = init.points(3).unwrap();
        assert_eq!((a0.clone(), a1.clone()), (b0, b1));
        assert_ne!(a0, a1);
        let json = serde_json::to_value(&init).unwrap();
        assert_eq!(json["kind"], "gaussian");
    }
}
