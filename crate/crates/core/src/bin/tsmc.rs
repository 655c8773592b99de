use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use twisted_smc::experiment::{reference_log_z, run_experiment, summarize_file, RunConfig};

#[derive(Parser)]
#[command(name = "tsmc", version, about = "Twisted SMC experiments on factor graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (method, N, replication) of a configuration.
    Run {
        config: PathBuf,
        /// Directory for the results file and sidecar.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Per-(method, N) mean, stdev, bias and MSE of a results file.
    Summarize {
        results: PathBuf,
        /// Fail when the file has no oracle row.
        #[arg(long)]
        require_oracle: bool,
    },
    /// Print the reference log Z of a configuration.
    Oracle {
        config: PathBuf,
        /// Particles for the twisted-SMC fallback reference.
        #[arg(long, default_value_t = 100_000)]
        reference_n: usize,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match cli.command {
        Command::Run { config, out, jobs } => {
            let cfg = match RunConfig::read(&config) {
                Ok(c) => c,
                Err(e) => return fail(2, e),
            };
            match run_experiment(&cfg, out.as_deref(), jobs) {
                Ok(o) => {
                    println!("{} rows -> {}", o.rows.len(), o.results_path.display());
                    println!("metadata -> {}", o.meta_path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e.exit_code() as u8, e),
            }
        }
        Command::Summarize { results, require_oracle } => match summarize_file(&results, require_oracle) {
            Ok(rows) => {
                println!("method,twist,N,replications,mean,stdev,bias,mse");
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                for r in rows {
                    println!(
                        "{},{},{},{},{},{},{},{}",
                        r.method, r.twist, r.n, r.replications, r.mean, r.stdev, opt(r.bias), opt(r.mse)
                    );
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(3, e),
        },
        Command::Oracle { config, reference_n } => {
            let cfg = match RunConfig::read(&config) {
                Ok(c) => c,
                Err(e) => return fail(2, e),
            };
            match reference_log_z(&cfg, reference_n) {
                Ok(o) => {
                    println!("log_Z = {}", o.log_z);
                    println!("method = {}", o.method);
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e.exit_code() as u8, e),
            }
        }
    }
}
