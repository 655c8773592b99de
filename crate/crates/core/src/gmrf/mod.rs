//! Latent Gaussian Markov random fields with per-site exponential-family
//! observations: Laplace approximation, sequential Gaussian conditionals,
//! and the twisted and bootstrap SMC models built on them.

mod io;
mod laplace;
mod obs;
mod sequential;


pub use io::{parse_adjacency, parse_observations, read_adjacency, read_observations, GmrfIoError};
pub use laplace::{approx_loglik, gaussian_log_marginal, laplace_fit, log_posterior_gradient, LaplaceApprox, LaplaceOptions};
pub use obs::{ObsData, ObsModel};
pub use sequential::{
    bootstrap_gmrf_model, twisted_gmrf_model, ConditionalProposal, GmrfSequentialModel,
    LaplaceTwisting, PriorSafeguard, SequentialGaussian,
};

use crate::rng::SmcRng;
use crate::sparse::{Cholesky, SparseError, SymmetricMatrix};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmrfError {
    #[error("adjacency is not symmetric: {i} lists {j} but not the reverse")]
    AsymmetricAdjacency { i: usize, j: usize },
    #[error("variable {0} is listed as its own neighbor")]
    SelfLoop(usize),
    #[error("Cholesky factorization failed: {0}")]
    Cholesky(#[from] SparseError),
    #[error("Laplace iteration did not converge in {max_iter} iterations")]
    NoConvergence { max_iter: usize, last: Vec<f64> },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
}

/// Gaussian prior `N(mean, precision^{-1})`.
#[derive(Debug, Clone)]
pub struct GaussianMrf {
    mean: Vec<f64>,
    precision: SymmetricMatrix,
}

impl GaussianMrf {
    /// Checks dimensions and positive definiteness.
    pub fn new(mean: Vec<f64>, precision: SymmetricMatrix) -> Result<Self, GmrfError> {
        if mean.len() != precision.dim() {
            return Err(GmrfError::Dimension(format!(
                "mean has length {} but precision is {}x{}",
                mean.len(),
                precision.dim(),
                precision.dim()
            )));
        }
        Cholesky::factor(&precision)?;
        Ok(GaussianMrf { mean, precision })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn precision(&self) -> &SymmetricMatrix {
        &self.precision
    }

    /// Sparsity pattern of the precision as neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.dim())
            .map(|j| self.precision.column(j).map(|(i, _)| i).filter(|&i| i != j).collect())
            .collect()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let chol = Cholesky::factor(&self.precision).expect("checked at construction");
        let d: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        0.5 * chol.log_det()
            - 0.5 * self.precision.quad_form(&d)
            - 0.5 * self.dim() as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    /// Draws `x = mean + L^{-T} z`.
    pub fn sample(&self, rng: &mut SmcRng) -> Vec<f64> {
        let chol = Cholesky::factor(&self.precision).expect("checked at construction");
        let mut z: Vec<f64> = (0..self.dim()).map(|_| StandardNormal.sample(rng)).collect();
        chol.solve_upper(&mut z);
        z.iter().zip(&self.mean).map(|(a, m)| a + m).collect()
    }
}

/// Draws a latent field from the prior and one observation per site.
pub fn simulate_data(gmrf: &GaussianMrf, obs: &ObsModel, trials: &[u32], rng: &mut SmcRng) -> (Vec<f64>, ObsData) {
    assert_eq!(trials.len(), gmrf.dim(), "one trial count per site");
    let x = gmrf.sample(rng);
    let y = x.iter().zip(trials).map(|(&xt, &n)| obs.sample(n, xt, rng)).collect();
    (x, ObsData { y, trials: trials.to_vec() })
}

/// How the CAR scale parameter enters the prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauConvention {
    /// Covariance `tau * Q^{-1}`, so precision `Q / tau`.
    #[default]
    CovarianceScale,
    /// Precision `tau * Q`.
    PrecisionScale,
}

impl FromStr for TauConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "covariance-scale" => Ok(TauConvention::CovarianceScale),
            "precision-scale" => Ok(TauConvention::PrecisionScale),
            _ => Err(format!("unknown tau convention {s:?}")),
        }
    }
}

impl fmt::Display for TauConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TauConvention::CovarianceScale => "covariance-scale",
            TauConvention::PrecisionScale => "precision-scale",
        })
    }
}

/// Conditional autoregressive prior on an undirected neighborhood graph:
/// `Q_tt = n_t + d`, `Q_tt' = -1` for neighbors, scaled by `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct CarConfig {
    pub adjacency: Vec<Vec<usize>>,
    pub tau: f64,
    pub d: f64,
    pub convention: TauConvention,
}

pub fn build_car(cfg: &CarConfig) -> Result<GaussianMrf, GmrfError> {
    let n = cfg.adjacency.len();
    let mut entries = Vec::new();
    for (i, nbrs) in cfg.adjacency.iter().enumerate() {
        for &j in nbrs {
            if j == i {
                return Err(GmrfError::SelfLoop(i));
            }
            if j >= n {
                return Err(GmrfError::Dimension(format!("neighbor {j} of {i} out of range")));
            }
            if !cfg.adjacency[j].contains(&i) {
                return Err(GmrfError::AsymmetricAdjacency { i, j });
            }
            if i < j {
                entries.push((i, j, -1.0));
            }
        }
        entries.push((i, i, nbrs.len() as f64 + cfg.d));
    }
    let scale = match cfg.convention {
        TauConvention::CovarianceScale => 1.0 / cfg.tau,
        TauConvention::PrecisionScale => cfg.tau,
    };
    let q = SymmetricMatrix::from_entries(n, &entries).scaled(scale);
    GaussianMrf::new(vec![0.0; n], q)
}

/// Four-neighbor rectangular lattice, row-major indices.
pub fn lattice_adjacency(width: usize, height: usize) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); width * height];
    for r in 0..height {
        for c in 0..width {
            let v = r * width + c;
            if c + 1 < width {
                adj[v].push(v + 1);
                adj[v + 1].push(v);
            }
            if r + 1 < height {
                adj[v].push(v + width);
                adj[v + width].push(v);
            }
        }
    }
    adj.iter_mut().for_each(|a| a.sort_unstable());
    adj
}
