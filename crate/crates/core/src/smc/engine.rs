use super::{
    resample::{ess, resample},
    ParticleSystem, Proposal, SequentialModel, SmcConfig, SmcError, SmcResult,
};
use crate::math::normalize_log_weights;
use crate::rng::{rng_from_seed, SmcRng};

/// `sum_t (log sum_i exp(lw_t^i) - log N)` over per-step unnormalized log
/// weights.
pub fn log_normalizing_constant(log_weights_per_step: &[Vec<f64>]) -> f64 {
    log_weights_per_step
        .iter()
        .map(|lw| crate::math::log_mean_exp(lw))
        .sum()
}

struct Recorder<V> {
    particles: ParticleSystem<V>,
    log_increments: Vec<f64>,
    ess_trace: Vec<f64>,
    resampled: Vec<bool>,
    max_log_weight: Vec<f64>,
    log_n: f64,
}

impl<V: Copy> Recorder<V> {
    fn new(cfg: &SmcConfig) -> Self {
        Recorder {
            particles: ParticleSystem::new(cfg.n, cfg.storage, cfg.keep_weight_history),
            log_increments: Vec::new(),
            ess_trace: Vec::new(),
            resampled: Vec::new(),
            max_log_weight: Vec::new(),
            log_n: (cfg.n as f64).ln(),
        }
    }

    /// Normalizes the step's weights, writes them into `log_w` (normalized,
    /// log space) and records diagnostics.
    #[allow(clippy::too_many_arguments)]
    fn finish_step(
        &mut self,
        t: usize,
        values: Vec<V>,
        ancestors: Vec<usize>,
        log_wt: Vec<f64>,
        log_omega: Vec<f64>,
        log_nu: Option<Vec<f64>>,
        resampled: bool,
        log_w: &mut [f64],
    ) -> Result<(), SmcError> {
        let mut w = Vec::with_capacity(log_wt.len());
        let lse = normalize_log_weights(&log_wt, &mut w);
        if lse == f64::NEG_INFINITY {
            return Err(SmcError::AllWeightsZero { step: t });
        }
        for (lw, &l) in log_w.iter_mut().zip(&log_wt) {
            *lw = l - lse;
        }
        self.log_increments.push(lse - self.log_n);
        self.ess_trace.push(ess(&w));
        self.resampled.push(resampled);
        self.max_log_weight
            .push(log_wt.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        self.particles
            .push_step(values, ancestors, log_wt, w, log_omega, log_nu);
        Ok(())
    }

    fn into_result(self, cfg: &SmcConfig) -> SmcResult<V> {
        SmcResult {
            log_z_hat: self.log_increments.iter().sum(),
            log_increments: self.log_increments,
            ess_trace: self.ess_trace,
            resampled: self.resampled,
            max_log_weight: self.max_log_weight,
            particles: self.particles,
            config: *cfg,
        }
    }
}

/// Propagates every particle one step; `log_prev[i]` is the log weight
/// factor `w_{t-1}^a / nu_{t-1}^a` carried by particle `i`.
fn propagate<M, P>(
    model: &M,
    proposal: &P,
    paths: &mut [Vec<M::Value>],
    log_prev: &[f64],
    t: usize,
    rng: &mut SmcRng,
) -> Result<(Vec<M::Value>, Vec<f64>, Vec<f64>), SmcError>
where
    M: SequentialModel,
    P: Proposal<M> + ?Sized,
{
    let n = paths.len();
    let mut values = Vec::with_capacity(n);
    let mut log_omega = Vec::with_capacity(n);
    let mut log_wt = Vec::with_capacity(n);
    for (i, path) in paths.iter_mut().enumerate() {
        let (x, lo) = proposal.propose(model, path, rng).map_err(|e| match e {
            SmcError::ZeroNormalizer { .. } => SmcError::ZeroNormalizer { step: t, particle: i },
            other => other,
        })?;
        let lw = if log_prev[i] == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            lo + log_prev[i]
        };
        if lw.is_nan() || lw == f64::INFINITY {
            return Err(SmcError::NonFiniteWeight { step: t, particle: i });
        }
        path.push(x);
        values.push(x);
        log_omega.push(lo);
        log_wt.push(lw);
    }
    Ok((values, log_omega, log_wt))
}

/// Runs adaptive-resampling SMC.
///
/// Before step `t > 0`, candidate resampling probabilities
/// `nu^i ∝ w_{t-1}^i exp(adj^i)` are formed from the proposal's lookahead
/// adjustment. If `ESS(nu) < rho N` ancestors are drawn from `nu` and the new
/// weight is `omega w^a / nu^a`; otherwise ancestry is the identity and the
/// weight is `omega w N`.
pub fn run_smc<M, P>(
    model: &M,
    proposal: &P,
    cfg: &SmcConfig,
) -> Result<SmcResult<M::Value>, SmcError>
where
    M: SequentialModel,
    P: Proposal<M> + ?Sized,
{
    cfg.validate()?;
    let n = cfg.n;
    let steps = model.num_steps();
    let mut rng = rng_from_seed(cfg.seed);
    let mut rec = Recorder::new(cfg);
    let log_n = rec.log_n;
    let identity: Vec<usize> = (0..n).collect();
    let mut paths: Vec<Vec<M::Value>> = (0..n).map(|_| Vec::with_capacity(steps)).collect();
    let mut log_w = vec![0.0; n];
    let mut log_prev = vec![0.0; n];
    let mut nu_hat = Vec::with_capacity(n);
    let mut nu = Vec::with_capacity(n);

    for t in 0..steps {
        let mut ancestors = identity.clone();
        let mut log_nu = None;
        let mut resampled = false;
        if t > 0 {
            nu_hat.clear();
            for (i, path) in paths.iter().enumerate() {
                nu_hat.push(if log_w[i] == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    log_w[i] + proposal.log_resampling_adjustment(model, path)
                });
            }
            let lse = normalize_log_weights(&nu_hat, &mut nu);
            if lse == f64::NEG_INFINITY {
                return Err(SmcError::AllWeightsZero { step: t });
            }
            if lse.is_nan() || lse == f64::INFINITY {
                let particle = nu_hat.iter().position(|v| !v.is_finite()).unwrap_or(0);
                return Err(SmcError::NonFiniteWeight { step: t, particle });
            }
            if ess(&nu) < cfg.ess_threshold * n as f64 {
                resampled = true;
                ancestors = resample(&nu, cfg.scheme, n, &mut rng);
                let lnu: Vec<f64> = nu_hat.iter().map(|v| v - lse).collect();
                for (lp, &a) in log_prev.iter_mut().zip(&ancestors) {
                    *lp = log_w[a] - lnu[a];
                }
                paths = ancestors.iter().map(|&a| paths[a].clone()).collect();
                log_nu = Some(lnu);
            } else {
                for (lp, &lw) in log_prev.iter_mut().zip(&log_w) {
                    *lp = lw + log_n;
                }
            }
        }
        let (values, log_omega, log_wt) =
            propagate(model, proposal, &mut paths, &log_prev, t, &mut rng)?;
        rec.finish_step(t, values, ancestors, log_wt, log_omega, log_nu, resampled, &mut log_w)?;
    }
    Ok(rec.into_result(cfg))
}

/// Sequential importance sampling: a resampling-free loop whose output is
/// identical to [`run_smc`] with threshold zero.
pub fn run_sis<M, P>(
    model: &M,
    proposal: &P,
    cfg: &SmcConfig,
) -> Result<SmcResult<M::Value>, SmcError>
where
    M: SequentialModel,
    P: Proposal<M> + ?Sized,
{
    cfg.validate()?;
    let n = cfg.n;
    let steps = model.num_steps();
    let mut rng = rng_from_seed(cfg.seed);
    let mut rec = Recorder::new(cfg);
    let log_n = rec.log_n;
    let mut cfg_out = *cfg;
    cfg_out.ess_threshold = 0.0;
    let mut paths: Vec<Vec<M::Value>> = (0..n).map(|_| Vec::with_capacity(steps)).collect();
    let mut log_w = vec![0.0; n];
    let mut log_prev = vec![0.0; n];
    for t in 0..steps {
        if t > 0 {
            for (lp, &lw) in log_prev.iter_mut().zip(&log_w) {
                *lp = lw + log_n;
            }
        }
        let (values, log_omega, log_wt) =
            propagate(model, proposal, &mut paths, &log_prev, t, &mut rng)?;
        rec.finish_step(t, values, (0..n).collect(), log_wt, log_omega, None, false, &mut log_w)?;
    }
    Ok(rec.into_result(&cfg_out))
}
