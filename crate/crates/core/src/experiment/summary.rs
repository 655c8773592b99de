//! Per-`(method, N)` summaries of a results file.

use super::runner::{ResultRow, RunError};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SummaryError {
    #[error("error statistics requested but the results contain no oracle row")]
    MissingOracle,
    #[error("more than one oracle row")]
    DuplicateOracle,
    #[error("results contain no replication rows")]
    Empty,
    #[error(transparent)]
    Run(#[from] RunError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub method: String,
    pub twist: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub replications: usize,
    pub mean: f64,
    pub stdev: f64,
    pub bias: Option<f64>,
    pub mse: Option<f64>,
    pub rmse: Option<f64>,
}

/// Groups replication rows by `(method, N)` in order of first appearance.
///
/// `stdev` uses the `R - 1` divisor and is zero for a single replication.
/// Bias and MSE are against the oracle row; with `require_oracle` a missing
/// oracle is an error, otherwise those columns are left empty.
pub fn summarize_rows(rows: &[ResultRow], require_oracle: bool) -> Result<Vec<SummaryRow>, SummaryError> {
    let mut oracles = rows.iter().filter(|r| r.is_oracle());
    let oracle = oracles.next().map(|r| r.log_z_hat);
    if oracles.next().is_some() {
        return Err(SummaryError::DuplicateOracle);
    }
    if require_oracle && oracle.is_none() {
        return Err(SummaryError::MissingOracle);
    }
    let mut groups: Vec<(&ResultRow, Vec<f64>)> = Vec::new();
    for row in rows.iter().filter(|r| !r.is_oracle()) {
        match groups.iter_mut().find(|(g, _)| g.method == row.method && g.n == row.n) {
            Some((_, xs)) => xs.push(row.log_z_hat),
            None => groups.push((row, vec![row.log_z_hat])),
        }
    }
    if groups.is_empty() {
        return Err(SummaryError::Empty);
    }
    Ok(groups
        .into_iter()
        .map(|(first, xs)| {
            let r = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / r;
            let stdev = if xs.len() > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
            } else {
                0.0
            };
            let mse = oracle.map(|z| xs.iter().map(|x| (x - z).powi(2)).sum::<f64>() / r);
            SummaryRow {
                experiment: first.experiment.clone(),
                method: first.method.clone(),
                twist: first.twist.clone(),
                n: first.n,
                replications: xs.len(),
                mean,
                stdev,
                bias: oracle.map(|z| mean - z),
                mse,
                rmse: mse.map(f64::sqrt),
            }
        })
        .collect())
}

/// Path of the summary written next to a results file.
pub fn summary_path(results: &Path) -> std::path::PathBuf {
    let stem = results.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    results.with_file_name(format!("{stem}.summary.csv"))
}

/// Summarizes a results file and writes `<stem>.summary.csv` beside it.
pub fn summarize_file(results: &Path, require_oracle: bool) -> Result<Vec<SummaryRow>, SummaryError> {
    let rows = super::runner::read_results(results)?;
    let summary = summarize_rows(&rows, require_oracle)?;
    let out = summary_path(results);
    let err = |e: &dyn std::fmt::Display| RunError::Output { path: out.display().to_string(), message: e.to_string() };
    let mut w = csv::Writer::from_path(&out).map_err(|e| err(&e))?;
    for row in &summary {
        w.serialize(row).map_err(|e| err(&e))?;
    }
    w.flush().map_err(|e| err(&e))?;
    Ok(summary)
}
