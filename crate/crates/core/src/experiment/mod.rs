//! Configuration-driven experiments: replicated runs written to a CSV
//! results file with a JSON metadata sidecar, and summaries of those files.

mod config;
mod runner;
mod summary;

pub use config::{
    CarSection, ConfigError, Experiment, GraphSection, IsingSection, LdaSection, Method, OracleMode, RunConfig,
};
pub use runner::{
    output_paths, read_results, reference_log_z, run_experiment, OracleRecord, ResultRow, RunError, RunMeta,
    RunOutput, ORACLE_METHOD,
};
pub use summary::{summarize_file, summarize_rows, summary_path, SummaryError, SummaryRow};
