use super::laplace::PermutedCholesky;
use super::{GaussianMrf, GmrfError, LaplaceApprox, ObsData, ObsModel};
use crate::graph::VariableOrder;
use crate::rng::SmcRng;
use crate::smc::{Proposal, SequentialModel, SmcError};
use crate::sparse::{Cholesky, SymmetricMatrix};
use crate::twist::{ApproximateTwisting, Safeguard};
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;
use std::sync::Arc;

/// One-step conditionals `N(x_t | x_0..x_{t-1})` of a Gaussian with the
/// remaining steps integrated out.
///
/// The precision is factorized with the visiting order reversed, so the
/// Cholesky column of step `t` only touches earlier steps.
#[derive(Debug, Clone)]
pub struct SequentialGaussian {
    order: VariableOrder,
    mean_by_step: Vec<f64>,
    chol: Cholesky,
}

impl SequentialGaussian {
    /// Gaussian with canonical parameters `(canonical, precision)`, visited in `order`.
    pub fn new(precision: &SymmetricMatrix, canonical: &[f64], order: &VariableOrder) -> Result<Self, GmrfError> {
        let n = precision.dim();
        if canonical.len() != n || order.len() != n {
            return Err(GmrfError::Dimension("precision, mean and order disagree".into()));
        }
        let mean = PermutedCholesky::new(precision)?.solve(canonical);
        let perm: Vec<usize> = (0..n).map(|k| order.variable(n - 1 - k)).collect();
        let chol = Cholesky::factor(&precision.permuted(&perm))?;
        Ok(SequentialGaussian {
            order: order.clone(),
            mean_by_step: (0..n).map(|t| mean[order.variable(t)]).collect(),
            chol,
        })
    }

    pub fn num_steps(&self) -> usize {
        self.mean_by_step.len()
    }

    pub fn order(&self) -> &VariableOrder {
        &self.order
    }

    /// Mean of the full joint, indexed by step.
    pub fn mean_by_step(&self) -> &[f64] {
        &self.mean_by_step
    }

    /// Nonzeros in the Cholesky factor.
    pub fn factor_nnz(&self) -> usize {
        self.chol.nnz()
    }

    /// `(mean, standard deviation)` of step `history.len()`.
    pub fn conditional(&self, history: &[f64]) -> (f64, f64) {
        let n = self.num_steps();
        let t = history.len();
        let k = n - 1 - t;
        let shift: f64 = self
            .chol
            .below_diagonal(k)
            .map(|(i, v)| {
                let s = n - 1 - i;
                v * (history[s] - self.mean_by_step[s])
            })
            .sum();
        let l = self.chol.diag(k);
        (self.mean_by_step[t] - shift / l, 1.0 / l)
    }

    pub fn log_density(&self, history: &[f64], x: f64) -> f64 {
        let (m, sd) = self.conditional(history);
        let z = (x - m) / sd;
        -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
    }

    pub fn sample(&self, history: &[f64], rng: &mut SmcRng) -> f64 {
        let (m, sd) = self.conditional(history);
        let z: f64 = StandardNormal.sample(rng);
        m + sd * z
    }

    /// Joint log density of a full path, as the product of conditionals.
    pub fn log_joint(&self, path: &[f64]) -> f64 {
        (0..path.len()).map(|t| self.log_density(&path[..t], path[t])).sum()
    }
}

#[derive(Debug, Clone)]
struct SiteParams {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl SiteParams {
    fn from_laplace(la: &LaplaceApprox, order: &VariableOrder) -> Self {
        let pick = |v: &[f64]| order.as_slice().iter().map(|&i| v[i]).collect();
        SiteParams { a: pick(&la.a), b: pick(&la.b), c: pick(&la.c) }
    }

    fn log_value(&self, t: usize, x: f64) -> f64 {
        self.a[t] + self.b[t] * x - 0.5 * self.c[t] * x * x
    }

    fn log_sup(&self, t: usize) -> f64 {
        if self.c[t] > 0.0 {
            self.a[t] + self.b[t] * self.b[t] / (2.0 * self.c[t])
        } else if self.b[t] == 0.0 {
            self.a[t]
        } else {
            f64::INFINITY
        }
    }
}

/// Latent GMRF posterior as a sequence of targets over a visiting order.
///
/// With Laplace sites the proposal is the surrogate posterior conditional
/// and the incremental weight is `p(y_t | x_t) / p~(y_t | x_t)` (times
/// `Z~` at the first step). Without sites the proposal is the prior
/// conditional and the weight is `p(y_t | x_t)`.
#[derive(Debug, Clone)]
pub struct GmrfSequentialModel {
    obs: ObsModel,
    data: ObsData,
    sites: Option<SiteParams>,
    conditional: Arc<SequentialGaussian>,
    log_z_tilde: f64,
}

impl GmrfSequentialModel {
    pub fn is_twisted(&self) -> bool {
        self.sites.is_some()
    }

    pub fn conditional(&self) -> &SequentialGaussian {
        &self.conditional
    }

    pub fn order(&self) -> &VariableOrder {
        self.conditional.order()
    }

    /// Log incremental weight of extending `history` by `x`.
    pub fn log_weight(&self, history: &[f64], x: f64) -> f64 {
        let t = history.len();
        let lp = self.obs.log_density(self.data.y[t], self.data.trials[t], x);
        match &self.sites {
            None => lp,
            Some(s) => {
                let first = if t == 0 { self.log_z_tilde } else { 0.0 };
                first + lp - s.log_value(t, x)
            }
        }
    }
}

impl SequentialModel for GmrfSequentialModel {
    type Value = f64;

    fn num_steps(&self) -> usize {
        self.data.len()
    }

    fn log_increment(&self, history: &[f64], x: f64) -> f64 {
        self.log_weight(history, x) + self.conditional.log_density(history, x)
    }
}

/// Samples from the model's own sequential Gaussian conditionals.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConditionalProposal;

impl Proposal<GmrfSequentialModel> for ConditionalProposal {
    fn sample(&self, model: &GmrfSequentialModel, history: &[f64], rng: &mut SmcRng) -> f64 {
        model.conditional.sample(history, rng)
    }

    fn log_density(&self, model: &GmrfSequentialModel, history: &[f64], x: f64) -> f64 {
        model.conditional.log_density(history, x)
    }

    fn propose(
        &self,
        model: &GmrfSequentialModel,
        history: &[f64],
        rng: &mut SmcRng,
    ) -> Result<(f64, f64), SmcError> {
        let x = model.conditional.sample(history, rng);
        Ok((x, model.log_weight(history, x)))
    }
}

fn check(gmrf: &GaussianMrf, data: &ObsData, order: &VariableOrder) -> Result<(), GmrfError> {
    if data.len() != gmrf.dim() || order.len() != gmrf.dim() {
        return Err(GmrfError::Dimension(format!(
            "{} sites, {} observations, order of length {}",
            gmrf.dim(),
            data.len(),
            order.len()
        )));
    }
    Ok(())
}

/// Twisted model from a Laplace fit; `order[t]` is the site visited at step `t`.
pub fn twisted_gmrf_model(
    gmrf: &GaussianMrf,
    obs: &ObsModel,
    data: &ObsData,
    la: &LaplaceApprox,
    order: &VariableOrder,
) -> Result<(GmrfSequentialModel, ConditionalProposal), GmrfError> {
    check(gmrf, data, order)?;
    let conditional = SequentialGaussian::new(&la.precision, &la.canonical_mean, order)?;
    Ok((
        GmrfSequentialModel {
            obs: *obs,
            data: data.permuted(order.as_slice()),
            sites: Some(SiteParams::from_laplace(la, order)),
            conditional: Arc::new(conditional),
            log_z_tilde: la.log_z_tilde,
        },
        ConditionalProposal,
    ))
}

/// Bootstrap model proposing from the prior conditionals.
pub fn bootstrap_gmrf_model(
    gmrf: &GaussianMrf,
    obs: &ObsModel,
    data: &ObsData,
    order: &VariableOrder,
) -> Result<(GmrfSequentialModel, ConditionalProposal), GmrfError> {
    check(gmrf, data, order)?;
    let q = gmrf.precision();
    let conditional = SequentialGaussian::new(q, &q.mul_vec(gmrf.mean()), order)?;
    Ok((
        GmrfSequentialModel {
            obs: *obs,
            data: data.permuted(order.as_slice()),
            sites: None,
            conditional: Arc::new(conditional),
            log_z_tilde: 0.0,
        },
        ConditionalProposal,
    ))
}

/// Laplace twisting `psi_t = E[prod_{s>t} p~(y_s | x_s) | x_0..x_t]` under
/// the prior, exposed for regularization. Step factors are
/// `p(x_t | x_<t) p(y_t | x_t)`.
#[derive(Debug, Clone)]
pub struct LaplaceTwisting {
    obs: ObsModel,
    data: ObsData,
    sites: SiteParams,
    prior: Arc<SequentialGaussian>,
    approx: Arc<SequentialGaussian>,
    log_z_tilde: f64,
    /// `sum_{s >= len} log sup p~_s`, indexed by prefix length.
    log_sup_suffix: Vec<f64>,
}

/// Prior conditional as safeguard, with `delta_t = 1 / sup_x p(y_t | x)`.
#[derive(Debug, Clone)]
pub struct PriorSafeguard {
    obs: ObsModel,
    data: ObsData,
    prior: Arc<SequentialGaussian>,
}

impl LaplaceTwisting {
    pub fn new(
        gmrf: &GaussianMrf,
        obs: &ObsModel,
        data: &ObsData,
        la: &LaplaceApprox,
        order: &VariableOrder,
    ) -> Result<(Self, PriorSafeguard), GmrfError> {
        check(gmrf, data, order)?;
        let q = gmrf.precision();
        let prior = Arc::new(SequentialGaussian::new(q, &q.mul_vec(gmrf.mean()), order)?);
        let approx = Arc::new(SequentialGaussian::new(&la.precision, &la.canonical_mean, order)?);
        let sites = SiteParams::from_laplace(la, order);
        let n = gmrf.dim();
        let mut log_sup_suffix = vec![0.0; n + 1];
        for t in (0..n).rev() {
            log_sup_suffix[t] = log_sup_suffix[t + 1] + sites.log_sup(t);
        }
        let data = data.permuted(order.as_slice());
        Ok((
            LaplaceTwisting {
                obs: *obs,
                data: data.clone(),
                sites,
                prior: prior.clone(),
                approx,
                log_z_tilde: la.log_z_tilde,
                log_sup_suffix,
            },
            PriorSafeguard { obs: *obs, data, prior },
        ))
    }
}

impl ApproximateTwisting for LaplaceTwisting {
    type Value = f64;

    fn num_steps(&self) -> usize {
        self.data.len()
    }

    fn log_psi(&self, prefix: &[f64]) -> f64 {
        if prefix.len() == self.num_steps() {
            return 0.0;
        }
        // psi_{t-1} pi~(x_t | x_<t) = p(x_t | x_<t) p~(y_t | x_t) psi_t
        let mut log_psi = self.log_z_tilde;
        for t in 0..prefix.len() {
            let h = &prefix[..t];
            log_psi += self.approx.log_density(h, prefix[t])
                - self.prior.log_density(h, prefix[t])
                - self.sites.log_value(t, prefix[t]);
        }
        log_psi
    }

    fn log_exact_factors(&self, history: &[f64], x: f64) -> f64 {
        let t = history.len();
        self.prior.log_density(history, x) + self.obs.log_density(self.data.y[t], self.data.trials[t], x)
    }

    fn log_approx_factors(&self, history: &[f64], x: f64) -> f64 {
        self.prior.log_density(history, x) + self.sites.log_value(history.len(), x)
    }

    fn sample_approx(&self, history: &[f64], rng: &mut SmcRng) -> f64 {
        self.approx.sample(history, rng)
    }

    fn log_approx_conditional(&self, history: &[f64], x: f64) -> f64 {
        self.approx.log_density(history, x)
    }

    fn log_psi_sup(&self, len: usize) -> f64 {
        self.log_sup_suffix[len]
    }
}

impl Safeguard<f64> for PriorSafeguard {
    fn sample(&self, history: &[f64], rng: &mut SmcRng) -> f64 {
        self.prior.sample(history, rng)
    }

    fn log_density(&self, history: &[f64], x: f64) -> f64 {
        self.prior.log_density(history, x)
    }

    fn log_delta(&self, t: usize) -> f64 {
        -self.obs.log_sup(self.data.y[t], self.data.trials[t])
    }
}
