//! The `lsaga` command line.
//!
//! Every subcommand resolves an [`ExperimentConfig`] (file, then flags),
//! creates `<out-dir>/<subcommand>/<timestamp>/`, writes `metadata.json`
//! with the effective config before computing, then its CSVs and a
//! `summary.json`. The summary is also printed on stdout.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use commands::{cmd_check, cmd_clt, cmd_lemmas, cmd_rates, cmd_run};
pub use config::{ExperimentConfig, ProblemSpec};

use crate::error::{Error, Result};
use crate::problem::{DatasetFormat, LoadOptions};

#[derive(Debug, Parser)]
#[command(name = "lsaga", version, about = "λ-SAGA experiments: runs, CLT ensembles, rates, checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single runs per lambda with diagnostic traces.
    Run(Overrides),
    /// Ensembles of sqrt(n)(X_n - x*) under gamma_n = 1/n.
    Clt(Overrides),
    /// Moment decay rates E||X_n - x*||^{2p} along a checkpoint grid.
    Rates(Overrides),
    /// Problem constants and assumption verdicts.
    Check(Overrides),
    /// Norm-power constants, randomized inequality checks, recursion bound.
    Lemmas(Overrides),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Run(_) => "run",
            Command::Clt(_) => "clt",
            Command::Rates(_) => "rates",
            Command::Check(_) => "check",
            Command::Lemmas(_) => "lemmas",
        }
    }

    fn overrides(&self) -> &Overrides {
        match self {
            Command::Run(o) | Command::Clt(o) | Command::Rates(o) | Command::Check(o) | Command::Lemmas(o) => o,
        }
    }
}

/// Flags layered over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML config, or JSON (a previous `metadata.json` is accepted).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Repeatable; replaces the config's lambda list.
    #[arg(long = "lambda")]
    pub lambda: Vec<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub diag_every: Option<u64>,
    /// Logistic dataset file; replaces the configured problem.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// `dense-csv` or `svmlight`.
    #[arg(long)]
    pub format: Option<String>,
    /// Keep only the first rows of the dataset.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Rate checkpoints at every multiple of this many iterations.
    #[arg(long)]
    pub epoch_size: Option<u64>,
    /// Comma-separated rate checkpoints in iterations.
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Vec<u64>,
    /// Lower end of the default log-spaced checkpoint grid.
    #[arg(long)]
    pub checkpoint_min: Option<u64>,
    #[arg(long)]
    pub checkpoint_count: Option<usize>,
    /// Checkpoints below this are left out of slope fits.
    #[arg(long)]
    pub burn_in: Option<u64>,
    /// Comma-separated CLT horizons.
    #[arg(long, value_delimiter = ',')]
    pub horizons: Vec<u64>,
    /// Repeatable moment order.
    #[arg(long = "p")]
    pub p: Vec<u32>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub max_p: Option<u32>,
    #[arg(long)]
    pub pairs: Option<usize>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if !self.lambda.is_empty() {
            cfg.lambdas = self.lambda.clone();
        }
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$target = v; })*
            };
        }
        set!(c => c, alpha => alpha, iters => iters, reps => reps, seed => seed,
             diag_every => diag_every, out_dir => out_dir, max_p => max_p, pairs => pairs,
             checkpoint_min => checkpoint_min, checkpoint_count => checkpoint_count, burn_in => burn_in);
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if self.epoch_size.is_some() {
            cfg.epoch_size = self.epoch_size;
        }
        if self.mu.is_some() {
            cfg.mu = self.mu;
        }
        if !self.checkpoints.is_empty() {
            cfg.checkpoints = self.checkpoints.clone();
        }
        if !self.horizons.is_empty() {
            cfg.horizons = self.horizons.clone();
        }
        if !self.p.is_empty() {
            cfg.p_list = self.p.clone();
        }

        let format = self.format.as_deref().map(str::parse::<DatasetFormat>).transpose()?;
        if let Some(path) = &self.dataset {
            let load = match &cfg.problem {
                ProblemSpec::Dataset { load, .. } => load.clone(),
                _ => LoadOptions::default(),
            };
            cfg.problem = ProblemSpec::Dataset {
                path: path.clone(),
                load,
            };
        }
        if let ProblemSpec::Dataset { load, .. } = &mut cfg.problem {
            if let Some(f) = format {
                load.format = f;
            }
            if self.limit.is_some() {
                load.limit = self.limit;
            }
        } else if format.is_some() || self.limit.is_some() {
            return Err(Error::Config("format/limit: only apply to a dataset problem".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Creates a fresh `<out_dir>/<subcommand>/<timestamp>/`.
pub fn output_dir(out_dir: &Path, subcommand: &str) -> Result<PathBuf> {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
    let base = out_dir.join(subcommand);
    std::fs::create_dir_all(&base)?;
    let mut dir = base.join(&stamp);
    let mut k = 1;
    while dir.exists() {
        dir = base.join(format!("{stamp}-{k}"));
        k += 1;
    }
    std::fs::create_dir(&dir)?;
    Ok(dir)
}

pub(crate) fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn metadata(subcommand: &str, cfg: &ExperimentConfig, wall_time: Option<f64>, status: &str) -> serde_json::Value {
    json!({
        "tool": "lsaga",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "status": status,
        "wall_time_secs": wall_time,
        "config": cfg,
    })
}

/// Runs one parsed invocation; returns the output directory.
pub fn execute(cli: &Cli) -> Result<PathBuf> {
    let name = cli.command.name();
    let cfg = cli.command.overrides().resolve()?;
    let dir = output_dir(&cfg.out_dir, name)?;
    write_json(&dir.join("metadata.json"), &metadata(name, &cfg, None, "started"))?;
    log::info!("{name}: writing to {}", dir.display());

    let start = Instant::now();
    let result = match &cli.command {
        Command::Run(_) => cmd_run(&cfg, &dir),
        Command::Clt(_) => cmd_clt(&cfg, &dir),
        Command::Rates(_) => cmd_rates(&cfg, &dir),
        Command::Check(_) => cmd_check(&cfg, &dir),
        Command::Lemmas(_) => cmd_lemmas(&cfg, &dir),
    };
    let elapsed = Some(start.elapsed().as_secs_f64());
    match result {
        Ok(summary) => {
            write_json(&dir.join("metadata.json"), &metadata(name, &cfg, elapsed, "completed"))?;
            write_json(&dir.join("summary.json"), &summary)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(dir)
        }
        Err(e) => {
            write_json(&dir.join("metadata.json"), &metadata(name, &cfg, elapsed, "failed"))?;
            Err(e)
        }
    }
}
