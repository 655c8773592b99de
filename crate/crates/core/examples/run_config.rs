//! Runs an experiment configuration and prints its summary, as the `tsmc`
//! binary does.
//!
//! ```text
//! cargo run --release --example run_config -- crates/core/examples/configs/ising8.toml
//! ```

use std::path::PathBuf;
use twisted_smc::experiment::{run_experiment, summarize_rows, RunConfig};

fn main() {
    let path: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/lda_toy.toml")));
    let cfg = RunConfig::read(&path).unwrap_or_else(|e| panic!("{e}"));
    let out_dir = std::env::temp_dir().join("tsmc-example");
    let out = run_experiment(&cfg, Some(&out_dir), 4).unwrap();
    println!("wrote {} and {}", out.results_path.display(), out.meta_path.display());
    if let Some(o) = &out.meta.oracle {
        println!("oracle ({}) log Z = {:.6}", o.method, o.log_z);
    }
    for s in summarize_rows(&out.rows, false).unwrap() {
        let rmse = s.rmse.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!("{:<10} {:<6} N={:<5} mean {:.4} stdev {:.4} rmse {rmse}", s.method, s.twist, s.n, s.mean, s.stdev);
    }
}
