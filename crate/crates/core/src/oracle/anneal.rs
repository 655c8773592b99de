use super::{OracleError, OracleMethod, OracleResult};
use crate::graph::FactorGraph;
use crate::math::{inverse_cdf, log_sum_exp, normalize_log_weights};
use crate::rng::rng_from_seed;
use crate::smc::{ess, resample, ResamplingScheme};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    /// Inverse temperatures, strictly increasing from 0 to 1.
    pub ladder: Vec<f64>,
    pub particles: usize,
    /// Single-site Gibbs sweeps after each reweighting.
    pub sweeps: usize,
    pub seed: u64,
}

impl AnnealConfig {
    /// Evenly spaced ladder with `rungs` steps after the initial zero.
    pub fn linear(rungs: usize, particles: usize, sweeps: usize, seed: u64) -> Self {
        AnnealConfig {
            ladder: (0..=rungs).map(|m| m as f64 / rungs as f64).collect(),
            particles,
            sweeps,
            seed,
        }
    }

    fn validate(&self) -> Result<(), OracleError> {
        let l = &self.ladder;
        if l.len() < 2 || l[0] != 0.0 || *l.last().unwrap() != 1.0 {
            return Err(OracleError::InvalidConfig("ladder must run from 0 to 1".into()));
        }
        if l.windows(2).any(|p| p[1] <= p[0]) {
            return Err(OracleError::InvalidConfig("ladder must be strictly increasing".into()));
        }
        if self.particles == 0 {
            return Err(OracleError::InvalidConfig("need at least one particle".into()));
        }
        Ok(())
    }
}

/// `beta * log_phi`, with `0 * log 0 = 0`.
fn tempered(beta: f64, log_phi: f64) -> f64 {
    if beta == 0.0 {
        0.0
    } else {
        beta * log_phi
    }
}

/// Annealed SMC from the uniform distribution to the factor-graph density
/// through `gamma^beta`, with multinomial resampling when the ESS drops
/// below half the particles and single-site Gibbs moves at each rung.
pub fn annealed_smc_log_z(graph: &FactorGraph, cfg: &AnnealConfig) -> Result<OracleResult, OracleError> {
    cfg.validate()?;
    let cards = graph
        .cardinalities()
        .map_err(|e| OracleError::NotDiscrete(e.to_string()))?;
    let n = cfg.particles;
    let mut rng = rng_from_seed(cfg.seed);
    let var_factors = graph.variable_factors();
    let mut xs: Vec<Vec<usize>> = (0..n)
        .map(|_| cards.iter().map(|&c| rng.random_range(0..c)).collect())
        .collect();
    let mut log_z: f64 = cards.iter().map(|&c| (c as f64).ln()).sum();
    let mut log_w = vec![-(n as f64).ln(); n];
    let mut w = Vec::with_capacity(n);
    let mut buf = Vec::new();
    let mut cond = Vec::new();
    for m in 1..cfg.ladder.len() {
        let (b0, b1) = (cfg.ladder[m - 1], cfg.ladder[m]);
        let lw: Vec<f64> = xs
            .iter()
            .zip(&log_w)
            .map(|(x, lw)| lw + tempered(b1 - b0, graph.log_unnormalized(x)))
            .collect();
        let lse = normalize_log_weights(&lw, &mut w);
        log_z += lse;
        for (l, v) in log_w.iter_mut().zip(&lw) {
            *l = v - lse;
        }
        if ess(&w) < 0.5 * n as f64 {
            let a = resample(&w, ResamplingScheme::Multinomial, n, &mut rng);
            xs = a.iter().map(|&i| xs[i].clone()).collect();
            log_w.iter_mut().for_each(|l| *l = -(n as f64).ln());
        }
        for x in xs.iter_mut() {
            for _ in 0..cfg.sweeps {
                for v in 0..cards.len() {
                    cond.clear();
                    for k in 0..cards[v] {
                        x[v] = k;
                        let mut e = 0.0;
                        for &j in &var_factors[v] {
                            let f = graph.factor(j);
                            buf.clear();
                            buf.extend(f.scope().iter().map(|&u| x[u]));
                            e += tempered(b1, f.log_value_discrete(&buf));
                        }
                        cond.push(e);
                    }
                    let l = log_sum_exp(&cond);
                    let probs: Vec<f64> = cond.iter().map(|c| (c - l).exp()).collect();
                    x[v] = inverse_cdf(&probs, rng.random());
                }
            }
        }
    }
    Ok(OracleResult {
        log_z,
        method: OracleMethod::AnnealedSmc,
        marginals: None,
    })
}
