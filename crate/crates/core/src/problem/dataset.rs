//! Dataset ingestion into a dense [`LogisticProblem`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::LogisticProblem;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    DenseCsv,
    Svmlight,
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense-csv" | "csv" => Ok(DatasetFormat::DenseCsv),
            "svmlight" | "svmlight-style" => Ok(DatasetFormat::Svmlight),
            other => Err(Error::Config(format!("unknown dataset format '{other}'"))),
        }
    }
}

/// How raw labels become `{0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum LabelRule {
    /// Labels must already be 0 or 1.
    Binary,
    /// Digit classes: 0..=4 map to 0 and 5..=9 map to 1.
    DigitHalves,
    /// `label >= at` maps to 1, anything else to 0.
    Threshold { at: f64 },
}

impl LabelRule {
    fn apply(&self, raw: f64) -> std::result::Result<f64, String> {
        match *self {
            LabelRule::Binary if raw == 0.0 || raw == 1.0 => Ok(raw),
            LabelRule::Binary => Err(format!("label {raw} is not 0 or 1")),
            LabelRule::DigitHalves => {
                if raw.fract() != 0.0 || !(0.0..=9.0).contains(&raw) {
                    Err(format!("label {raw} is not a digit class 0..9"))
                } else if raw <= 4.0 {
                    Ok(0.0)
                } else {
                    Ok(1.0)
                }
            }
            LabelRule::Threshold { at } => Ok(if raw >= at { 1.0 } else { 0.0 }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadOptions {
    pub format: DatasetFormat,
    pub label_rule: LabelRule,
    /// Column index of the label in dense CSV files.
    pub label_column: usize,
    pub delimiter: char,
    pub has_header: bool,
    /// Multiplies every feature, e.g. `1/255` for pixel data.
    pub feature_scale: Option<f64>,
    /// Only the first `limit` rows are kept.
    pub limit: Option<usize>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            format: DatasetFormat::DenseCsv,
            label_rule: LabelRule::Binary,
            label_column: 0,
            delimiter: ',',
            has_header: false,
            feature_scale: None,
            limit: None,
        }
    }
}

pub fn load_dataset(path: &Path, opts: &LoadOptions) -> Result<LogisticProblem> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.display().to_string()),
        _ => Error::Io(e),
    })?;
    let (rows, labels, d) = match opts.format {
        DatasetFormat::DenseCsv => parse_dense(&text, opts)?,
        DatasetFormat::Svmlight => parse_svmlight(&text, opts)?,
    };
    let scale = opts.feature_scale.unwrap_or(1.0);
    let features: Vec<f64> = rows.into_iter().flatten().map(|v| v * scale).collect();
    let problem = LogisticProblem::new(features, labels, d)?;
    Ok(problem.with_metadata(json!({
        "source": path.display().to_string(),
        "format": opts.format,
        "label_rule": opts.label_rule,
        "feature_scaling": opts.feature_scale,
        "limit": opts.limit,
    })))
}

type Parsed = (Vec<Vec<f64>>, Vec<f64>, usize);

fn data_lines<'a>(text: &'a str, opts: &LoadOptions) -> impl Iterator<Item = (usize, &'a str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .skip(usize::from(opts.has_header))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .take(opts.limit.unwrap_or(usize::MAX))
}

fn parse_dense(text: &str, opts: &LoadOptions) -> Result<Parsed> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (row, line) in data_lines(text, opts) {
        let cells: Vec<&str> = line.split(opts.delimiter).map(str::trim).collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::Parse {
                    row,
                    message: format!("expected {w} columns, found {}", cells.len()),
                })
            }
            _ => {}
        }
        if opts.label_column >= cells.len() {
            return Err(Error::Parse {
                row,
                message: format!("label column {} missing", opts.label_column),
            });
        }
        let mut features = Vec::with_capacity(cells.len() - 1);
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                message: format!("non-numeric cell '{cell}' in column {j}"),
            })?;
            if j == opts.label_column {
                labels.push(opts.label_rule.apply(v).map_err(|message| Error::Parse { row, message })?);
            } else {
                features.push(v);
            }
        }
        rows.push(features);
    }
    let d = width.ok_or(Error::Parse {
        row: 0,
        message: "no rows".into(),
    })? - 1;
    if d == 0 {
        return Err(Error::Parse {
            row: 1,
            message: "no feature columns".into(),
        });
    }
    Ok((rows, labels, d))
}

fn parse_svmlight(text: &str, opts: &LoadOptions) -> Result<Parsed> {
    let mut sparse: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut d = 0usize;
    for (row, line) in data_lines(text, opts) {
        let line = line.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let raw = tokens.next().unwrap_or("");
        let v: f64 = raw.parse().map_err(|_| Error::Parse {
            row,
            message: format!("non-numeric label '{raw}'"),
        })?;
        labels.push(opts.label_rule.apply(v).map_err(|message| Error::Parse { row, message })?);
        let mut entries = Vec::new();
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                row,
                message: format!("expected idx:val, found '{tok}'"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                row,
                message: format!("bad feature index '{idx}'"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    row,
                    message: "feature indices start at 1".into(),
                });
            }
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                row,
                message: format!("non-numeric value '{val}'"),
            })?;
            d = d.max(idx);
            entries.push((idx - 1, val));
        }
        sparse.push(entries);
    }
    if sparse.is_empty() {
        return Err(Error::Parse {
            row: 0,
            message: "no rows".into(),
        });
    }
    if d == 0 {
        return Err(Error::Parse {
            row: 1,
            message: "no feature columns".into(),
        });
    }
    let rows = sparse
        .into_iter()
        .map(|entries| {
            let mut dense = vec![0.0; d];
            for (i, v) in entries {
                dense[i] = v;
            }
            dense
        })
        .collect();
    Ok((rows, labels, d))
}
