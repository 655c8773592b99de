//! Generic sequential Monte Carlo engine.
//!
//! A [`SequentialModel`] defines unnormalized targets `gamma_t` over growing
//! paths `x_0..x_t` through their log-ratios `log gamma_t - log gamma_{t-1}`.
//! A [`Proposal`] extends a path by one step. [`run_smc`] implements adaptive
//! resampling with optional lookahead adjustment of the resampling
//! probabilities, and returns the normalizing-constant estimate along with
//! the full particle system.

mod engine;
mod particles;
mod resample;

pub use engine::{log_normalizing_constant, run_sis, run_smc};
pub use particles::{ParticleSystem, StorageKind};
pub use resample::{ess, resample, ResamplingScheme};

use crate::rng::SmcRng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmcError {
    #[error("all particle weights are zero at step {step}")]
    AllWeightsZero { step: usize },
    #[error("non-finite weight at step {step}, particle {particle}")]
    NonFiniteWeight { step: usize, particle: usize },
    #[error("proposal normalizer is zero at step {step}, particle {particle}")]
    ZeroNormalizer { step: usize, particle: usize },
    #[error("particle index {index} out of range for N = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// A sequence of unnormalized targets over paths of length `1..=T`.
pub trait SequentialModel: Sync {
    type Value: Copy + Send + Sync + PartialEq + Debug;

    fn num_steps(&self) -> usize;

    /// `log gamma_t(history ++ [x]) - log gamma_{t-1}(history)` with
    /// `t = history.len()` and `gamma_{-1} = 1`.
    fn log_increment(&self, history: &[Self::Value], x: Self::Value) -> f64;

    /// `log gamma_t` of a full prefix, as the sum of increments.
    fn log_gamma(&self, path: &[Self::Value]) -> f64 {
        (0..path.len())
            .map(|t| self.log_increment(&path[..t], path[t]))
            .sum()
    }
}

/// A model whose every step takes values in `0..step_cardinality(t)`.
pub trait FiniteSequentialModel: SequentialModel<Value = usize> {
    fn step_cardinality(&self, t: usize) -> usize;
}

/// One-step proposal kernel `q_t(x_t | x_{0..t-1})`.
pub trait Proposal<M: SequentialModel>: Sync {
    fn sample(&self, model: &M, history: &[M::Value], rng: &mut SmcRng) -> M::Value;

    fn log_density(&self, model: &M, history: &[M::Value], x: M::Value) -> f64;

    /// Log multiplier applied to the previous weight of a particle when
    /// forming resampling probabilities (zero for standard SMC).
    fn log_resampling_adjustment(&self, _model: &M, _history: &[M::Value]) -> f64 {
        0.0
    }

    /// Samples `x_t` and returns it with the log incremental weight
    /// `log gamma_t - log gamma_{t-1} - log q_t`.
    fn propose(
        &self,
        model: &M,
        history: &[M::Value],
        rng: &mut SmcRng,
    ) -> Result<(M::Value, f64), SmcError> {
        let x = self.sample(model, history, rng);
        let log_omega = model.log_increment(history, x)
            - self.log_density(model, history, x);
        Ok((x, log_omega))
    }
}

/// Uniform proposal over the step domain of a finite model.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformProposal;

impl<M: FiniteSequentialModel> Proposal<M> for UniformProposal {
    fn sample(&self, model: &M, history: &[usize], rng: &mut SmcRng) -> usize {
        rng.random_range(0..model.step_cardinality(history.len()))
    }

    fn log_density(&self, model: &M, history: &[usize], _x: usize) -> f64 {
        -(model.step_cardinality(history.len()) as f64).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmcConfig {
    /// Number of particles.
    pub n: usize,
    pub scheme: ResamplingScheme,
    /// Resample when `ESS < ess_threshold * N`.
    pub ess_threshold: f64,
    pub seed: u64,
    pub storage: StorageKind,
    /// Keep the unnormalized and normalized weights of every step.
    pub keep_weight_history: bool,
}

impl SmcConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        SmcConfig {
            n,
            scheme: ResamplingScheme::Systematic,
            ess_threshold: 0.5,
            seed,
            storage: StorageKind::Dense,
            keep_weight_history: false,
        }
    }

    pub fn with_scheme(mut self, scheme: ResamplingScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_threshold(mut self, rho: f64) -> Self {
        self.ess_threshold = rho;
        self
    }

    pub fn with_storage(mut self, storage: StorageKind) -> Self {
        self.storage = storage;
        self
    }

    pub fn with_weight_history(mut self) -> Self {
        self.keep_weight_history = true;
        self
    }

    pub fn validate(&self) -> Result<(), SmcError> {
        if self.n == 0 {
            return Err(SmcError::InvalidConfig("N must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.ess_threshold) {
            return Err(SmcError::InvalidConfig(format!(
                "ESS threshold {} outside [0, 1]",
                self.ess_threshold
            )));
        }
        Ok(())
    }
}

/// Output of an SMC run.
#[derive(Debug, Clone)]
pub struct SmcResult<V> {
    pub log_z_hat: f64,
    /// `log (1/N sum_i w~_t^i)` per step.
    pub log_increments: Vec<f64>,
    /// ESS of the normalized weights after each step.
    pub ess_trace: Vec<f64>,
    /// Whether resampling happened before propagating each step.
    pub resampled: Vec<bool>,
    /// Largest unnormalized log weight per step.
    pub max_log_weight: Vec<f64>,
    pub particles: ParticleSystem<V>,
    pub config: SmcConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmcRecord {
    #[serde(rename = "log_Z_hat")]
    pub log_z_hat: f64,
    pub ess_trace: Vec<f64>,
    pub resampled_flags: Vec<bool>,
    pub seed: u64,
    pub config: SmcConfig,
}

impl<V: Copy> SmcResult<V> {
    pub fn ess_min(&self) -> f64 {
        self.ess_trace.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn resample_count(&self) -> usize {
        self.resampled.iter().filter(|&&r| r).count()
    }

    /// Reconstructs the full path of final particle `i`.
    pub fn trajectory(&self, i: usize) -> Result<Vec<V>, SmcError> {
        self.particles.reconstruct_trajectory(i)
    }

    pub fn record(&self) -> SmcRecord {
        SmcRecord {
            log_z_hat: self.log_z_hat,
            ess_trace: self.ess_trace.clone(),
            resampled_flags: self.resampled.clone(),
            seed: self.config.seed,
            config: self.config,
        }
    }
}
