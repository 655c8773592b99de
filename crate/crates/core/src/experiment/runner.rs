//! Replicated runs, the results file and its metadata sidecar.

use super::config::{ConfigError, Experiment, Method, OracleMode, RunConfig};
use crate::graph::{read_graph, FactorGraph};
use crate::models::{ising_graph, ExperimentBundle, FieldSpec, IsingSpec, ModelError};
use crate::oracle::{annealed_smc_log_z, AnnealConfig};
use crate::rng::derive_seed;
use crate::smc::{SmcConfig, SmcError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{method} N={n} rep={rep}: {source}")]
    Smc { method: Method, n: usize, rep: usize, source: SmcError },
    #[error("oracle: {0}")]
    Oracle(#[from] ModelError),
    #[error("writing {path}: {message}")]
    Output { path: String, message: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl RunError {
    /// Process exit code: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 3,
        }
    }
}

/// One line of the results file. The oracle row has method `oracle`,
/// `N = 0` and empty diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub method: String,
    pub twist: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    #[serde(rename = "log_Z_hat")]
    pub log_z_hat: f64,
    pub ess_min: Option<f64>,
    pub resample_count: Option<usize>,
    pub wall_ms: Option<f64>,
    pub config_hash: String,
}

pub const ORACLE_METHOD: &str = "oracle";

impl ResultRow {
    pub fn is_oracle(&self) -> bool {
        self.method == ORACLE_METHOD
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    #[serde(rename = "log_Z")]
    pub log_z: f64,
    pub method: String,
}

/// Contents of the `.meta.json` sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub created: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub results_file: String,
    pub rows: usize,
    pub oracle: Option<OracleRecord>,
    /// Deterministic approximation of `log Z` per method (EP or Laplace).
    pub deterministic_estimates: BTreeMap<String, f64>,
    pub notes: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub results_path: PathBuf,
    pub meta_path: PathBuf,
    pub rows: Vec<ResultRow>,
    pub meta: RunMeta,
}

/// Results and sidecar paths for an output stem.
pub fn output_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let name = stem.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "results".into());
    let dir = stem.parent().unwrap_or(Path::new(""));
    (dir.join(format!("{name}.csv")), dir.join(format!("{name}.meta.json")))
}

fn out_err(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Output { path: path.display().to_string(), message: e.to_string() }
}

/// Runs every `(method, N, rep)` cell of `cfg`, writing results under
/// `out_dir` (or next to the configured output stem when `None`).
///
/// Replications of one `(method, N)` cell run on a pool of `jobs` workers and
/// are appended in replication order once the cell completes, so the file
/// is independent of scheduling and a partial file survives interruption.
pub fn run_experiment(cfg: &RunConfig, out_dir: Option<&Path>, jobs: usize) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let stem = match out_dir {
        Some(dir) => dir.join(cfg.output.file_name().unwrap_or_else(|| "results".as_ref())),
        None => cfg.resolve(&cfg.output),
    };
    let (results_path, meta_path) = output_paths(&stem);
    if let Some(parent) = results_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| out_err(parent, e))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;

    let hash = cfg.hash();
    let experiment = cfg.experiment.to_string();
    let created = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);

    let mut bundles: Vec<(Method, ExperimentBundle)> = Vec::new();
    for &m in &cfg.methods {
        if !bundles.iter().any(|(b, _)| *b == m) {
            bundles.push((m, cfg.bundle(m)?));
        }
    }

    let oracle = match cfg.oracle {
        OracleMode::None => None,
        OracleMode::Auto => match bundles[0].1.oracle_log_z() {
            Some(v) => Some(OracleRecord { log_z: v?, method: bundles[0].1.oracle.name().to_string() }),
            None => None,
        },
    };

    let file = File::create(&results_path).map_err(|e| out_err(&results_path, e))?;
    let mut file = std::io::BufWriter::new(file);
    writeln!(file, "# created {created}").map_err(|e| out_err(&results_path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    let mut rows = Vec::new();
    let push = |writer: &mut csv::Writer<_>, row: ResultRow, rows: &mut Vec<ResultRow>| -> Result<(), RunError> {
        writer.serialize(&row).map_err(|e| out_err(&results_path, e))?;
        rows.push(row);
        Ok(())
    };
    if let Some(o) = &oracle {
        let row = ResultRow {
            experiment: experiment.clone(),
            method: ORACLE_METHOD.into(),
            twist: o.method.clone(),
            n: 0,
            rep: 0,
            seed: 0,
            log_z_hat: o.log_z,
            ess_min: None,
            resample_count: None,
            wall_ms: None,
            config_hash: hash.clone(),
        };
        push(&mut writer, row, &mut rows)?;
        writer.flush().map_err(|e| out_err(&results_path, e))?;
    }

    for &method in &cfg.methods {
        let bundle = &bundles.iter().find(|(m, _)| *m == method).expect("built above").1;
        let label = method.to_string();
        for &n in &cfg.n {
            let cell: Vec<Result<ResultRow, RunError>> = pool.install(|| {
                (0..cfg.replications)
                    .into_par_iter()
                    .map(|rep| {
                        let seed = derive_seed(cfg.seed, &label, n, rep);
                        let smc = SmcConfig::new(n, seed)
                            .with_scheme(cfg.resampling)
                            .with_threshold(cfg.ess_threshold);
                        let start = Instant::now();
                        let out = bundle
                            .run(&smc, method.is_sis())
                            .map_err(|source| RunError::Smc { method, n, rep, source })?;
                        let wall = start.elapsed().as_secs_f64() * 1e3;
                        Ok(ResultRow {
                            experiment: experiment.clone(),
                            method: label.clone(),
                            twist: bundle.twist.to_string(),
                            n,
                            rep,
                            seed,
                            log_z_hat: out.log_z_hat,
                            ess_min: Some(out.ess_min),
                            resample_count: Some(out.resample_count),
                            wall_ms: Some(if cfg.timing { wall } else { 0.0 }),
                            config_hash: hash.clone(),
                        })
                    })
                    .collect()
            });
            for row in cell {
                push(&mut writer, row?, &mut rows)?;
            }
            writer.flush().map_err(|e| out_err(&results_path, e))?;
        }
    }
    drop(writer);

    let meta = RunMeta {
        created,
        config_hash: hash,
        config: cfg.clone(),
        results_file: results_path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        rows: rows.len(),
        oracle,
        deterministic_estimates: bundles
            .iter()
            .filter_map(|(m, b)| b.deterministic_estimate.map(|v| (m.to_string(), v)))
            .collect(),
        notes: bundles.iter().map(|(m, b)| (m.to_string(), b.notes.clone())).collect(),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| out_err(&meta_path, e))?;
    std::fs::write(&meta_path, text + "\n").map_err(|e| out_err(&meta_path, e))?;
    Ok(RunOutput { results_path, meta_path, rows, meta })
}

/// Reads a results file, skipping `#` comment lines.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, RunError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| out_err(path, e))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| out_err(path, e)))
        .collect()
}

/// Best available value of `log Z` for a configuration: the exact oracle
/// when one applies, otherwise annealed SMC for discrete models, otherwise
/// a single twisted SMC run with `reference_n` particles.
pub fn reference_log_z(cfg: &RunConfig, reference_n: usize) -> Result<OracleRecord, RunError> {
    cfg.validate()?;
    let bundle = cfg.bundle(Method::SmcTwist)?;
    if let Some(v) = bundle.oracle_log_z() {
        return Ok(OracleRecord { log_z: v?, method: bundle.oracle.name().to_string() });
    }
    if let Some(graph) = discrete_graph(cfg)? {
        let anneal = AnnealConfig::linear(200, 2000, 2, cfg.seed);
        let r = annealed_smc_log_z(&graph, &anneal).map_err(ModelError::from)?;
        return Ok(OracleRecord { log_z: r.log_z, method: "annealed-smc".into() });
    }
    let smc = SmcConfig::new(reference_n, derive_seed(cfg.seed, "reference", reference_n, 0))
        .with_scheme(cfg.resampling)
        .with_threshold(cfg.ess_threshold);
    let out = bundle
        .run(&smc, false)
        .map_err(|source| RunError::Smc { method: Method::SmcTwist, n: reference_n, rep: 0, source })?;
    Ok(OracleRecord { log_z: out.log_z_hat, method: format!("smc-twist-reference-{reference_n}") })
}

fn discrete_graph(cfg: &RunConfig) -> Result<Option<FactorGraph>, RunError> {
    Ok(match cfg.experiment {
        Experiment::Ising => {
            let sec = cfg.ising.as_ref().expect("validated");
            let spec = IsingSpec {
                width: sec.width,
                height: sec.height,
                periodic: sec.periodic,
                coupling: sec.coupling,
                field: match (&sec.field, sec.field_seed) {
                    (Some(h), _) => FieldSpec::Explicit(h.clone()),
                    (_, s) => FieldSpec::Seed(s.unwrap_or(0)),
                },
                order: cfg.order_strategy()?,
            };
            Some(ising_graph(&spec)?)
        }
        Experiment::CustomGraph => {
            let sec = cfg.graph.as_ref().expect("validated");
            Some(read_graph(&cfg.resolve(&sec.file)).map_err(|e| ConfigError::Input(e.to_string()))?)
        }
        _ => None,
    })
}
