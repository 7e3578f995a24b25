use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::Initialization;
use crate::error::{Error, Result};
use crate::problem::{load_dataset, FiniteSumProblem, LoadOptions, LogisticProblem, QuadraticProblem};
use crate::schedule::StepSchedule;

/// Where the objective comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemSpec {
    /// `f_k(x) = ||x - a_k||^2 / 2` with Gaussian anchors.
    Quadratic { n: usize, d: usize, scale: f64, seed: u64 },
    /// Gaussian features, labels drawn from the logistic model at `x_true`
    /// (alternating `+1, -1, ...` when absent).
    Logistic {
        n: usize,
        d: usize,
        feature_scale: f64,
        seed: u64,
        #[serde(default)]
        x_true: Option<Vec<f64>>,
    },
    Dataset {
        path: PathBuf,
        #[serde(default)]
        load: LoadOptions,
    },
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec::Quadratic {
            n: 20,
            d: 2,
            scale: 1.0,
            seed: 0,
        }
    }
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Box<dyn FiniteSumProblem>> {
        Ok(match self {
            ProblemSpec::Quadratic { n, d, scale, seed } => Box::new(QuadraticProblem::seeded(*n, *d, *scale, *seed)?),
            ProblemSpec::Logistic {
                n,
                d,
                feature_scale,
                seed,
                x_true,
            } => {
                let x_true = match x_true {
                    Some(x) => x.clone(),
                    None => (0..*d).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect(),
                };
                if x_true.len() != *d {
                    return Err(Error::Config(format!(
                        "problem.x_true has length {} but problem.d = {d}",
                        x_true.len()
                    )));
                }
                Box::new(LogisticProblem::synthetic(*n, &x_true, *feature_scale, *seed)?)
            }
            ProblemSpec::Dataset { path, load } => Box::new(load_dataset(path, load)?),
        })
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, ProblemSpec::Quadratic { .. })
    }
}

/// Parameter record shared by every subcommand; each one reads the fields
/// it needs. A config echoed into `metadata.json` reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub lambdas: Vec<f64>,
    pub c: f64,
    pub alpha: f64,
    pub iters: u64,
    pub reps: usize,
    pub seed: u64,
    pub diag_every: u64,
    pub workers: Option<usize>,
    pub init: Initialization,
    pub out_dir: PathBuf,
    /// Extra CLT horizons; `iters` alone when empty.
    pub horizons: Vec<u64>,
    /// Explicit rate checkpoints in iterations.
    pub checkpoints: Vec<u64>,
    /// Reporting unit for rate checkpoints: every multiple of it up to `iters`.
    pub epoch_size: Option<u64>,
    /// Log-spaced grid `[checkpoint_min, iters]` used when neither
    /// `checkpoints` nor `epoch_size` is given.
    pub checkpoint_min: u64,
    pub checkpoint_count: usize,
    pub burn_in: u64,
    pub p_list: Vec<u32>,
    /// Restricted secant constant for the rate hypotheses.
    pub mu: Option<f64>,
    pub bootstrap: usize,
    pub dump_samples: bool,
    pub newton_tol: f64,
    pub sample_count: usize,
    pub max_p: u32,
    pub pairs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemSpec::default(),
            lambdas: vec![0.0, 0.5, 0.9, 1.0],
            c: 1.0,
            alpha: 1.0,
            iters: 100_000,
            reps: 1,
            seed: 0,
            diag_every: 1000,
            workers: None,
            init: Initialization::Zero,
            out_dir: PathBuf::from("out"),
            horizons: Vec::new(),
            checkpoints: Vec::new(),
            epoch_size: None,
            checkpoint_min: 100,
            checkpoint_count: 11,
            burn_in: 100,
            p_list: vec![1],
            mu: None,
            bootstrap: 1000,
            dump_samples: true,
            newton_tol: 1e-10,
            sample_count: 1000,
            max_p: 12,
            pairs: 100_000,
        }
    }
}

impl ExperimentConfig {
    /// Reads TOML, or JSON when the extension is `.json`. A JSON document
    /// with a top-level `config` key (a previous run's `metadata.json`) is
    /// unwrapped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            let mut value: serde_json::Value = serde_json::from_str(&text)?;
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
            serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn schedule(&self) -> Result<StepSchedule> {
        StepSchedule::new(self.c, self.alpha).map_err(|e| Error::Config(format!("c/alpha: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule()?;
        if self.lambdas.is_empty() {
            return Err(Error::Config("lambdas: at least one value required".into()));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::Config(format!("lambdas: {l} is outside [0, 1]")));
        }
        if self.iters == 0 {
            return Err(Error::Config("iters: must be positive".into()));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps: must be positive".into()));
        }
        if self.diag_every == 0 {
            return Err(Error::Config("diag_every: cadence must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers: must be positive".into()));
        }
        if self.epoch_size == Some(0) {
            return Err(Error::Config("epoch_size: must be positive".into()));
        }
        if self.p_list.iter().any(|&p| p == 0) {
            return Err(Error::Config("p_list: orders must be at least 1".into()));
        }
        if let Some(mu) = self.mu {
            if !(mu > 0.0) {
                return Err(Error::Config(format!("mu: must be positive, received {mu}")));
            }
        }
        Ok(())
    }

    /// `horizons`, or `[iters]` when empty.
    pub fn clt_horizons(&self) -> Vec<u64> {
        if self.horizons.is_empty() {
            vec![self.iters]
        } else {
            self.horizons.clone()
        }
    }

    pub fn rate_checkpoints(&self) -> Result<Vec<u64>> {
        if !self.checkpoints.is_empty() {
            return Ok(self.checkpoints.clone());
        }
        if let Some(e) = self.epoch_size {
            let v: Vec<u64> = (1..=self.iters / e).map(|k| k * e).collect();
            if v.len() < 2 {
                return Err(Error::Config(format!(
                    "epoch_size: {e} leaves fewer than 2 checkpoints within iters = {}",
                    self.iters
                )));
            }
            return Ok(v);
        }
        if self.checkpoint_min == 0 || self.checkpoint_min >= self.iters || self.checkpoint_count < 2 {
            return Err(Error::Config(format!(
                "checkpoint_min/checkpoint_count: need 1 <= checkpoint_min < iters and count >= 2 (got {}, {}, iters = {})",
                self.checkpoint_min, self.checkpoint_count, self.iters
            )));
        }
        Ok(crate::asymptotics::log_checkpoints(
            self.checkpoint_min,
            self.iters,
            self.checkpoint_count,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_with_partial_fields() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            lambdas = [0.0, 0.5]
            iters = 5000
            [problem]
            kind = "logistic"
            n = 100
            d = 3
            feature_scale = 1.0
            seed = 4
            "#,
        )
        .unwrap();
        assert_eq!(cfg.lambdas, vec![0.0, 0.5]);
        assert_eq!(cfg.reps, 1);
        assert!(matches!(cfg.problem, ProblemSpec::Logistic { n: 100, .. }));
        cfg.validate().unwrap();
    }

    #[test]
    fn json_round_trip_and_metadata_unwrap() {
        let cfg = ExperimentConfig {
            lambdas: vec![0.25],
            problem: ProblemSpec::Dataset {
                path: "data.csv".into(),
                load: LoadOptions::default(),
            },
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metadata.json");
        std::fs::write(&path, serde_json::json!({"version": "x", "config": cfg}).to_string()).unwrap();
        assert_eq!(ExperimentConfig::from_file(&path).unwrap(), cfg);
    }

    #[test]
    fn validation_names_fields() {
        let mut cfg = ExperimentConfig::default();
        cfg.lambdas = vec![1.5];
        assert!(cfg.validate().unwrap_err().to_string().contains("lambdas"));
        let mut cfg = ExperimentConfig::default();
        cfg.alpha = 0.4;
        assert!(cfg.validate().unwrap_err().to_string().contains("alpha"));
        let mut cfg = ExperimentConfig::default();
        cfg.diag_every = 0;
        assert!(cfg.validate().unwrap_err().to_string().contains("diag_every"));
    }

    #[test]
    fn checkpoint_sources() {
        let mut cfg = ExperimentConfig {
            iters: 10_000,
            ..Default::default()
        };
        cfg.epoch_size = Some(1000);
        assert_eq!(cfg.rate_checkpoints().unwrap().len(), 10);
        cfg.epoch_size = None;
        let grid = cfg.rate_checkpoints().unwrap();
        assert_eq!((grid[0], *grid.last().unwrap()), (100, 10_000));
        cfg.checkpoints = vec![5, 50];
        assert_eq!(cfg.rate_checkpoints().unwrap(), vec![5, 50]);
    }
}
