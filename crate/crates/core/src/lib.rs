//! Twisted sequential Monte Carlo for factor graphs.

pub mod graph;
pub mod math;
pub mod rng;
pub mod sparse;
pub mod smc;
pub mod twist;
pub mod lbp;
pub mod oracle;
pub mod gmrf;
pub mod lda;
pub mod models;
pub mod experiment;
