//! Ising lattice: baseline fully adapted SMC against SMC twisted with loopy
//! belief propagation, scored against the transfer-matrix value.
//!
//! ```text
//! cargo run --release --example ising_lbp -- 8 0.44
//! ```

use twisted_smc::lbp::LbpConfig;
use twisted_smc::models::{ising_bundle, DiscreteTwist, IsingSpec};
use twisted_smc::smc::SmcConfig;

fn rmse(bundle: &twisted_smc::models::ExperimentBundle, n: usize, truth: f64) -> f64 {
    let reps = 30;
    let sq: f64 = (0..reps)
        .map(|r| (bundle.run(&SmcConfig::new(n, 1000 + r), false).unwrap().log_z_hat - truth).powi(2))
        .sum();
    (sq / reps as f64).sqrt()
}

fn main() {
    let mut args = std::env::args().skip(1);
    let side: usize = args.next().map_or(6, |s| s.parse().expect("lattice side"));
    let coupling: f64 = args.next().map_or(0.44, |s| s.parse().expect("coupling"));
    let spec = IsingSpec::new(side, side, coupling, 1);

    let base = ising_bundle(&spec, DiscreteTwist::None, &LbpConfig::default()).unwrap();
    let twist = ising_bundle(&spec, DiscreteTwist::Lbp, &LbpConfig::default()).unwrap();
    let truth = base.oracle_log_z().expect("lattice narrow enough").unwrap();
    println!("{side}x{side} torus, J = {coupling}: log Z = {truth:.6}");
    for note in &twist.notes {
        println!("{note}");
    }
    println!("{:>6} {:>12} {:>12}", "N", "RMSE base", "RMSE twist");
    for n in [16, 64, 256] {
        println!("{n:>6} {:>12.4} {:>12.4}", rmse(&base, n, truth), rmse(&twist, n, truth));
    }
}
