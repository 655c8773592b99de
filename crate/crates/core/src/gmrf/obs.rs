use super::GmrfError;
use crate::math::{ln_gamma, log_binomial_coefficient, logistic, softplus};
use crate::rng::SmcRng;
use rand_distr::{Binomial, Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Observation family for `p(y_t | x_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ObsModel {
    /// `y ~ Binomial(n_t, logistic(x))`.
    BinomialLogit,
    /// `y ~ Poisson(exp(x))`.
    PoissonLog,
    /// `y ~ N(x, sigma^2)`.
    Gaussian { sigma: f64 },
}

/// Per-site observations. `trials` is only read by the binomial family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsData {
    pub y: Vec<f64>,
    pub trials: Vec<u32>,
}

impl ObsData {
    pub fn new(y: Vec<f64>, trials: Vec<u32>) -> Result<Self, GmrfError> {
        if y.len() != trials.len() {
            return Err(GmrfError::Dimension(format!(
                "{} observations but {} trial counts",
                y.len(),
                trials.len()
            )));
        }
        Ok(ObsData { y, trials })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Reorders sites so that entry `t` is site `order[t]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        ObsData {
            y: order.iter().map(|&v| self.y[v]).collect(),
            trials: order.iter().map(|&v| self.trials[v]).collect(),
        }
    }
}

impl ObsModel {
    pub fn log_density(&self, y: f64, trials: u32, x: f64) -> f64 {
        match *self {
            ObsModel::BinomialLogit => {
                log_binomial_coefficient(trials, y as u32) + y * x - trials as f64 * softplus(x)
            }
            ObsModel::PoissonLog => y * x - x.exp() - ln_gamma(y + 1.0),
            ObsModel::Gaussian { sigma } => {
                let z = (y - x) / sigma;
                -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * PI).ln()
            }
        }
    }

    /// `(log p, d/dx log p, d^2/dx^2 log p)` at `x`.
    pub fn derivatives(&self, y: f64, trials: u32, x: f64) -> (f64, f64, f64) {
        let l = self.log_density(y, trials, x);
        match *self {
            ObsModel::BinomialLogit => {
                let p = logistic(x);
                let n = trials as f64;
                (l, y - n * p, -n * p * (1.0 - p))
            }
            ObsModel::PoissonLog => {
                let e = x.exp();
                (l, y - e, -e)
            }
            ObsModel::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                (l, (y - x) / s2, -1.0 / s2)
            }
        }
    }

    /// `sup_x log p(y | x)`.
    pub fn log_sup(&self, y: f64, trials: u32) -> f64 {
        match *self {
            ObsModel::BinomialLogit => {
                let n = trials as f64;
                let xlogx = |a: f64| if a > 0.0 { a * a.ln() } else { 0.0 };
                log_binomial_coefficient(trials, y as u32) + xlogx(y) + xlogx(n - y) - xlogx(n)
            }
            ObsModel::PoissonLog => {
                if y > 0.0 {
                    y * y.ln() - y - ln_gamma(y + 1.0)
                } else {
                    0.0
                }
            }
            ObsModel::Gaussian { sigma } => -sigma.ln() - 0.5 * (2.0 * PI).ln(),
        }
    }

    pub fn sample(&self, trials: u32, x: f64, rng: &mut SmcRng) -> f64 {
        match *self {
            ObsModel::BinomialLogit => Binomial::new(trials as u64, logistic(x))
                .expect("valid probability")
                .sample(rng) as f64,
            ObsModel::PoissonLog => Poisson::new(x.exp()).map(|d| d.sample(rng)).unwrap_or(0.0),
            ObsModel::Gaussian { sigma } => Normal::new(x, sigma).expect("positive sigma").sample(rng),
        }
    }

    /// Checks that `y` lies in the support.
    pub fn validate(&self, y: f64, trials: u32) -> Result<(), GmrfError> {
        let ok = match *self {
            ObsModel::BinomialLogit => y >= 0.0 && y <= trials as f64 && y.fract() == 0.0,
            ObsModel::PoissonLog => y >= 0.0 && y.fract() == 0.0,
            ObsModel::Gaussian { sigma } => y.is_finite() && sigma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(GmrfError::InvalidObservation(format!("y = {y} (trials {trials}) under {self:?}")))
        }
    }

    pub fn is_log_concave(&self) -> bool {
        true
    }
}
