use crate::math::log_add;
use crate::rng::{rng_from_seed, SmcRng};
use crate::smc::{Proposal, SequentialModel};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegularizeError {
    #[error("regularization constant must be finite and nonnegative, got {0}")]
    InvalidEpsilon(f64),
    #[error("safeguard certificate fails at step {step}: {reason}")]
    UncertifiedSafeguard { step: usize, reason: String },
}

/// A twisting function `psi_t` that comes from an approximate model with
/// factors `f~`, so that `pi~_t(x_t | x_<t) = prod f~ * psi_t / psi_{t-1}`
/// is a normalized conditional that can be sampled.
///
/// Here `log_psi` of the empty prefix is the approximate normalizing
/// constant `psi_0`, and prefixes of full length have `psi = 1`.
pub trait ApproximateTwisting: Sync {
    type Value: Copy + Send + Sync + PartialEq + std::fmt::Debug;

    fn num_steps(&self) -> usize;

    fn log_psi(&self, prefix: &[Self::Value]) -> f64;

    /// `log prod_{j in F_t} f_j` at `history ++ [x]`.
    fn log_exact_factors(&self, history: &[Self::Value], x: Self::Value) -> f64;

    /// `log prod_{j in F_t} f~_j` at `history ++ [x]`.
    fn log_approx_factors(&self, history: &[Self::Value], x: Self::Value) -> f64;

    fn sample_approx(&self, history: &[Self::Value], rng: &mut SmcRng) -> Self::Value;

    /// `log pi~_t(x | history)`.
    fn log_approx_conditional(&self, history: &[Self::Value], x: Self::Value) -> f64;

    /// Upper bound on `log psi` over all prefixes of length `len`.
    fn log_psi_sup(&self, len: usize) -> f64;
}

/// A proposal `s_t` dominating the exact step factors:
/// `s_t(x | x_<t) >= delta_t * prod_{j in F_t} f_j`.
pub trait Safeguard<V>: Sync {
    fn sample(&self, history: &[V], rng: &mut SmcRng) -> V;

    fn log_density(&self, history: &[V], x: V) -> f64;

    /// `log delta_t` for step `t`.
    fn log_delta(&self, t: usize) -> f64;
}

/// Regularized twisting `psi_t + eps`, with proposals mixing the
/// approximate conditional and a safeguard:
/// `q_t = (1 - lambda_t) pi~_t + lambda_t s_t`,
/// `lambda_t = eps / (psi_{t-1} + eps)`. The final target is left unchanged.
///
/// Implements both the sequential model and its proposal.
pub struct Regularized<A, S> {
    approx: A,
    safeguard: S,
    log_eps: f64,
}

/// Number of random points checked against the safeguard certificate.
const SPOT_CHECKS: usize = 10_000;

impl<A: ApproximateTwisting, S: Safeguard<A::Value>> Regularized<A, S> {
    /// Validates `eps` and spot-checks the safeguard on points drawn
    /// forward from the approximate conditionals.
    pub fn new(approx: A, safeguard: S, eps: f64) -> Result<Self, RegularizeError> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(RegularizeError::InvalidEpsilon(eps));
        }
        let steps = approx.num_steps();
        for t in 0..steps {
            let d = safeguard.log_delta(t);
            if d.is_nan() || d == f64::NEG_INFINITY {
                return Err(RegularizeError::UncertifiedSafeguard {
                    step: t,
                    reason: "delta must be positive".into(),
                });
            }
        }
        let reg = Regularized {
            approx,
            safeguard,
            log_eps: eps.ln(),
        };
        if steps > 0 {
            reg.spot_check()?;
        }
        Ok(reg)
    }

    fn spot_check(&self) -> Result<(), RegularizeError> {
        let steps = self.approx.num_steps();
        let mut rng = rng_from_seed(0x5AFE_6A4D);
        let mut path = Vec::with_capacity(steps);
        for k in 0..SPOT_CHECKS {
            let t = k % steps;
            if t == 0 {
                path.clear();
            }
            // alternate between the two mixture components
            let x = if k % 2 == 0 {
                self.approx.sample_approx(&path, &mut rng)
            } else {
                self.safeguard.sample(&path, &mut rng)
            };
            let lhs = self.safeguard.log_density(&path, x);
            let rhs = self.safeguard.log_delta(t) + self.approx.log_exact_factors(&path, x);
            if lhs < rhs - 1e-9 * rhs.abs().max(1.0) {
                return Err(RegularizeError::UncertifiedSafeguard {
                    step: t,
                    reason: format!("log s = {lhs} < log(delta * f) = {rhs}"),
                });
            }
            path.push(x);
        }
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        self.log_eps.exp()
    }

    pub fn approximation(&self) -> &A {
        &self.approx
    }

    /// `log psi~` of a prefix: `log(psi + eps)` except at full length.
    pub fn log_psi_regularized(&self, prefix: &[A::Value]) -> f64 {
        if prefix.len() == self.approx.num_steps() {
            0.0
        } else {
            log_add(self.approx.log_psi(prefix), self.log_eps)
        }
    }

    /// `log lambda_t` and `log(1 - lambda_t)` given the history.
    pub fn log_mixture_weights(&self, history: &[A::Value]) -> (f64, f64) {
        let log_psi = self.approx.log_psi(history);
        let denom = log_add(log_psi, self.log_eps);
        (self.log_eps - denom, log_psi - denom)
    }

    /// Analytic upper bound on the log weight at step `t` (requires
    /// `eps > 0`).
    pub fn log_weight_bound(&self, t: usize) -> f64 {
        let steps = self.approx.num_steps();
        let numerator = if t + 1 == steps {
            0.0
        } else {
            log_add(self.approx.log_psi_sup(t + 1), self.log_eps)
        };
        let first = if t == 0 {
            log_add(self.approx.log_psi(&[]), self.log_eps)
        } else {
            0.0
        };
        first + numerator - self.log_eps - self.safeguard.log_delta(t)
    }
}

impl<A, S> SequentialModel for Regularized<A, S>
where
    A: ApproximateTwisting,
    S: Safeguard<A::Value>,
{
    type Value = A::Value;

    fn num_steps(&self) -> usize {
        self.approx.num_steps()
    }

    fn log_increment(&self, history: &[A::Value], x: A::Value) -> f64 {
        let mut prefix = Vec::with_capacity(history.len() + 1);
        prefix.extend_from_slice(history);
        prefix.push(x);
        let prev = if history.is_empty() {
            0.0
        } else {
            self.log_psi_regularized(history)
        };
        self.approx.log_exact_factors(history, x) + self.log_psi_regularized(&prefix) - prev
    }
}

impl<A, S> Proposal<Regularized<A, S>> for Regularized<A, S>
where
    A: ApproximateTwisting,
    S: Safeguard<A::Value>,
{
    fn sample(&self, _model: &Self, history: &[A::Value], rng: &mut SmcRng) -> A::Value {
        let (log_lambda, _) = self.log_mixture_weights(history);
        if log_lambda > f64::NEG_INFINITY && rng.random::<f64>() < log_lambda.exp() {
            self.safeguard.sample(history, rng)
        } else {
            self.approx.sample_approx(history, rng)
        }
    }

    fn log_density(&self, _model: &Self, history: &[A::Value], x: A::Value) -> f64 {
        let (log_lambda, log_keep) = self.log_mixture_weights(history);
        let approx = log_keep + self.approx.log_approx_conditional(history, x);
        if log_lambda == f64::NEG_INFINITY {
            approx
        } else {
            log_add(approx, log_lambda + self.safeguard.log_density(history, x))
        }
    }

}
