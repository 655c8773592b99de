//! Three ways to get `log Z` for a small Ising torus: enumeration, the
//! transfer-matrix recursion, and annealed SMC with Gibbs moves.

use twisted_smc::models::{ising_fields, ising_graph, IsingSpec};
use twisted_smc::oracle::{annealed_smc_log_z, enumerate_log_z, ising_log_z_dp, AnnealConfig};

fn main() {
    let spec = IsingSpec::new(4, 4, 0.44, 1);
    let graph = ising_graph(&spec).unwrap();
    let enumerated = enumerate_log_z(&graph, true).unwrap();
    let dp = ising_log_z_dp(4, 4, 0.44, &ising_fields(16, 1), true).unwrap();
    let annealed = annealed_smc_log_z(&graph, &AnnealConfig::linear(100, 2000, 2, 7)).unwrap();
    println!("enumeration     {:.10}", enumerated.log_z);
    println!("transfer matrix {:.10}", dp.log_z);
    println!("annealed SMC    {:.10}", annealed.log_z);
    let m = enumerated.marginals.unwrap();
    println!("P(spin 0 up) = {:.4}", m[0][1]);
}
