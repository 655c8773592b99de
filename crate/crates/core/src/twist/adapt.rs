use crate::math::{inverse_cdf, log_sum_exp};
use crate::rng::SmcRng;
use crate::smc::{FiniteSequentialModel, Proposal, SmcError};
use rand::Rng;

/// Locally optimal proposal `q_t(x) ∝ gamma_t / gamma_{t-1}` over a finite
/// step domain. With `lookahead`, resampling probabilities are multiplied by
/// the one-step normalizer, which makes the incremental weights constant.
#[derive(Debug, Clone, Copy)]
pub struct FullyAdapted {
    pub lookahead: bool,
}

impl Default for FullyAdapted {
    fn default() -> Self {
        FullyAdapted { lookahead: true }
    }
}

impl FullyAdapted {
    /// Log increments of every extension of `history`, and their
    /// log-sum-exp.
    pub fn increments<M: FiniteSequentialModel>(model: &M, history: &[usize]) -> (Vec<f64>, f64) {
        let k = model.step_cardinality(history.len());
        let incr: Vec<f64> = (0..k).map(|x| model.log_increment(history, x)).collect();
        let lse = log_sum_exp(&incr);
        (incr, lse)
    }

    fn draw(incr: &[f64], lse: f64, rng: &mut SmcRng) -> usize {
        let probs: Vec<f64> = incr.iter().map(|&l| (l - lse).exp()).collect();
        inverse_cdf(&probs, rng.random())
    }
}

impl<M: FiniteSequentialModel> Proposal<M> for FullyAdapted {
    fn sample(&self, model: &M, history: &[usize], rng: &mut SmcRng) -> usize {
        let (incr, lse) = Self::increments(model, history);
        Self::draw(&incr, lse, rng)
    }

    fn log_density(&self, model: &M, history: &[usize], x: usize) -> f64 {
        let (incr, lse) = Self::increments(model, history);
        incr[x] - lse
    }

    fn log_resampling_adjustment(&self, model: &M, history: &[usize]) -> f64 {
        if self.lookahead {
            Self::increments(model, history).1
        } else {
            0.0
        }
    }

    fn propose(
        &self,
        model: &M,
        history: &[usize],
        rng: &mut SmcRng,
    ) -> Result<(usize, f64), SmcError> {
        let (incr, lse) = Self::increments(model, history);
        if lse == f64::NEG_INFINITY {
            return Err(SmcError::ZeroNormalizer {
                step: history.len(),
                particle: 0,
            });
        }
        Ok((Self::draw(&incr, lse, rng), lse))
    }
}
