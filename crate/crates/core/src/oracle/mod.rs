//! Ground-truth normalizing constants: exhaustive enumeration, a
//! transfer-matrix dynamic program for Ising lattices, and annealed SMC.

mod anneal;
mod enumerate;
mod ising;

pub use anneal::{annealed_smc_log_z, AnnealConfig};
pub use enumerate::enumerate_log_z;
pub use ising::{ising_log_z_dp, MAX_DP_WIDTH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("joint state space of {states} states exceeds the enumeration limit {limit}")]
    TooLargeForEnumeration { states: f64, limit: usize },
    #[error("lattice width {width} exceeds the transfer limit {limit}")]
    WidthTooLarge { width: usize, limit: usize },
    #[error("oracle requires discrete variables: {0}")]
    NotDiscrete(String),
    #[error("invalid annealing configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    Enumeration,
    TransferMatrix,
    AnnealedSmc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub log_z: f64,
    pub method: OracleMethod,
    /// Exact single-variable marginals, when requested.
    pub marginals: Option<Vec<Vec<f64>>>,
}
