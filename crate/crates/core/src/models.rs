//! Benchmark model constructors: Ising lattices, CAR fields with binomial
//! observations, and LDA documents, each bundled with its proposal and an
//! optional ground-truth hook.

use crate::gmrf::{
    self, approx_loglik, bootstrap_gmrf_model, build_car, laplace_fit, lattice_adjacency, twisted_gmrf_model,
    CarConfig, ConditionalProposal, GaussianMrf, GmrfError, GmrfSequentialModel, LaplaceOptions, LaplaceTwisting,
    ObsData, ObsModel, PriorSafeguard, TauConvention,
};
use crate::graph::{reorder, Domain, Factor, FactorGraph, FactorKind, GraphError, OrderStrategy, VariableOrder};
use crate::lbp::{run_lbp, twisting_from_messages, LbpConfig, LbpTwist};
use crate::lda::{ep_fit, exact_loglik_enumerate, Document, EpApprox, EpOptions, LdaError, LdaModel, LdaSequentialModel};
use crate::oracle::{enumerate_log_z, ising_log_z_dp, OracleError, MAX_DP_WIDTH};
use crate::rng::rng_from_seed;
use crate::smc::{run_sis, run_smc, Proposal, SequentialModel, SmcConfig, SmcError, SmcResult};
use crate::twist::{FullyAdapted, RegularizeError, Regularized, SequentialGraph, TwistedModel, MAX_ENUMERATION_STATES};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Gmrf(#[from] GmrfError),
    #[error(transparent)]
    Lda(#[from] LdaError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Regularize(#[from] RegularizeError),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

/// External field of an Ising lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldSpec {
    /// `H_i ~ Uniform(-1, 1)` drawn from the given seed.
    Seed(u64),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsingSpec {
    pub width: usize,
    pub height: usize,
    pub periodic: bool,
    pub coupling: f64,
    pub field: FieldSpec,
    pub order: OrderStrategy,
}

impl IsingSpec {
    pub fn new(width: usize, height: usize, coupling: f64, field_seed: u64) -> Self {
        IsingSpec {
            width,
            height,
            periodic: true,
            coupling,
            field: FieldSpec::Seed(field_seed),
            order: OrderStrategy::Identity,
        }
    }

    pub fn fields(&self) -> Result<Vec<f64>, ModelError> {
        let n = self.width * self.height;
        match &self.field {
            FieldSpec::Seed(seed) => Ok(ising_fields(n, *seed)),
            FieldSpec::Explicit(h) if h.len() == n => Ok(h.clone()),
            FieldSpec::Explicit(h) => Err(ModelError::InvalidSpec(format!("{} field values for {n} sites", h.len()))),
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.width == 0 || self.height == 0 {
            return Err(ModelError::InvalidSpec("lattice dimensions must be at least 1".into()));
        }
        if !self.coupling.is_finite() {
            return Err(ModelError::InvalidSpec("coupling must be finite".into()));
        }
        Ok(())
    }
}

/// `n` fields drawn uniformly from `(-1, 1)`.
pub fn ising_fields(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Row-major Ising lattice with pair factors `exp(J s_i s_j)` and unary
/// factors `exp(H_i s_i)`, spins `s = 2x - 1`. Periodic bonds wrap along
/// every dimension of size at least 3.
pub fn ising_graph(spec: &IsingSpec) -> Result<FactorGraph, ModelError> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let fields = spec.fields()?;
    let pair = || FactorKind::IsingPair { coupling: spec.coupling };
    let mut factors = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let v = r * w + c;
            factors.push(Factor::new(vec![v], FactorKind::IsingUnary { field: fields[v] }));
            if c + 1 < w {
                factors.push(Factor::new(vec![v, v + 1], pair()));
            } else if spec.periodic && w >= 3 {
                factors.push(Factor::new(vec![r * w, v], pair()));
            }
            if r + 1 < h {
                factors.push(Factor::new(vec![v, v + w], pair()));
            } else if spec.periodic && h >= 3 {
                factors.push(Factor::new(vec![c, v], pair()));
            }
        }
    }
    Ok(FactorGraph::new(vec![Domain::Discrete(2); w * h], factors)?)
}

/// Ground truth available for a bundle.
#[derive(Debug, Clone)]
pub enum OracleHook {
    None,
    Enumerate(FactorGraph),
    IsingTransfer { width: usize, height: usize, coupling: f64, fields: Vec<f64>, periodic: bool },
    GaussianMarginal { gmrf: GaussianMrf, sigma: f64, y: Vec<f64> },
    LdaEnumerate { model: LdaModel, doc: Document },
}

impl OracleHook {
    /// Exact `log Z`, or `None` when no exact method applies.
    pub fn log_z(&self) -> Option<Result<f64, ModelError>> {
        match self {
            OracleHook::None => None,
            OracleHook::Enumerate(g) => Some(enumerate_log_z(g, false).map(|r| r.log_z).map_err(Into::into)),
            OracleHook::IsingTransfer { width, height, coupling, fields, periodic } => Some(
                ising_log_z_dp(*width, *height, *coupling, fields, *periodic)
                    .map(|r| r.log_z)
                    .map_err(Into::into),
            ),
            OracleHook::GaussianMarginal { gmrf, sigma, y } => {
                Some(gmrf::gaussian_log_marginal(gmrf, *sigma, y).map_err(Into::into))
            }
            OracleHook::LdaEnumerate { model, doc } => Some(exact_loglik_enumerate(model, doc).map_err(Into::into)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OracleHook::None => "none",
            OracleHook::Enumerate(_) => "enumeration",
            OracleHook::IsingTransfer { .. } => "transfer-matrix",
            OracleHook::GaussianMarginal { .. } => "gaussian-closed-form",
            OracleHook::LdaEnumerate { .. } => "lda-enumeration",
        }
    }
}

/// The sequential model and proposal of a bundle.
pub enum BundleModel {
    Discrete(Arc<SequentialGraph>),
    DiscreteLbp(TwistedModel<LbpTwist>),
    Gmrf(GmrfSequentialModel),
    GmrfRegularized(Box<Regularized<LaplaceTwisting, PriorSafeguard>>),
    Lda(LdaSequentialModel),
}

/// Observable summary of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub log_z_hat: f64,
    pub ess_min: f64,
    pub resample_count: usize,
    pub resampled: Vec<bool>,
}

impl<V: Copy> From<SmcResult<V>> for RunOutcome {
    fn from(r: SmcResult<V>) -> Self {
        RunOutcome {
            log_z_hat: r.log_z_hat,
            ess_min: r.ess_min(),
            resample_count: r.resample_count(),
            resampled: r.resampled,
        }
    }
}

/// A model ready to run, with metadata and an oracle hook.
pub struct ExperimentBundle {
    pub model: BundleModel,
    pub num_steps: usize,
    /// Twisting label: `none`, `lbp`, `laplace` or `ep`.
    pub twist: &'static str,
    /// Deterministic approximation of `log Z` (EP or Laplace), when one was fit.
    pub deterministic_estimate: Option<f64>,
    pub oracle: OracleHook,
    /// Free-form diagnostics (LBP convergence, skipped EP updates, ...).
    pub notes: Vec<String>,
}

fn go<M, P>(model: &M, proposal: &P, cfg: &SmcConfig, sis: bool) -> Result<RunOutcome, SmcError>
where
    M: SequentialModel,
    P: Proposal<M>,
{
    let r = if sis { run_sis(model, proposal, cfg)? } else { run_smc(model, proposal, cfg)? };
    Ok(r.into())
}

impl ExperimentBundle {
    /// One SMC run (or SIS when `sis` is set).
    pub fn run(&self, cfg: &SmcConfig, sis: bool) -> Result<RunOutcome, SmcError> {
        match &self.model {
            BundleModel::Discrete(m) => go(m.as_ref(), &FullyAdapted::default(), cfg, sis),
            BundleModel::DiscreteLbp(m) => go(m, &FullyAdapted::default(), cfg, sis),
            BundleModel::Gmrf(m) => go(m, &ConditionalProposal, cfg, sis),
            BundleModel::GmrfRegularized(m) => go(m.as_ref(), m.as_ref(), cfg, sis),
            BundleModel::Lda(m) => go(m, &FullyAdapted { lookahead: false }, cfg, sis),
        }
    }

    pub fn oracle_log_z(&self) -> Option<Result<f64, ModelError>> {
        self.oracle.log_z()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscreteTwist {
    None,
    Lbp,
}

/// Discrete factor graph with full adaptation, optionally twisted by LBP.
pub fn graph_bundle(
    graph: FactorGraph,
    order: &VariableOrder,
    twist: DiscreteTwist,
    lbp_cfg: &LbpConfig,
    oracle: OracleHook,
) -> Result<ExperimentBundle, ModelError> {
    let base = Arc::new(SequentialGraph::new(graph, order.clone())?);
    let num_steps = base.num_steps();
    let mut notes = Vec::new();
    let (model, label) = match twist {
        DiscreteTwist::None => (BundleModel::Discrete(base), "none"),
        DiscreteTwist::Lbp => {
            let msgs = run_lbp(base.graph(), lbp_cfg)?;
            notes.push(format!(
                "lbp: {} iterations, converged {}, residual {:.3e}",
                msgs.iterations, msgs.converged, msgs.residual
            ));
            let psi = twisting_from_messages(&msgs, &base);
            (BundleModel::DiscreteLbp(TwistedModel::new(base, psi)), "lbp")
        }
    };
    Ok(ExperimentBundle { model, num_steps, twist: label, deterministic_estimate: None, oracle, notes })
}

/// Picks the best available exact method for a discrete graph.
pub fn discrete_oracle(graph: &FactorGraph) -> OracleHook {
    match graph.cardinalities() {
        Ok(cards) if cards.iter().map(|&c| c as f64).product::<f64>() <= MAX_ENUMERATION_STATES as f64 => {
            OracleHook::Enumerate(graph.clone())
        }
        _ => OracleHook::None,
    }
}

pub fn ising_bundle(spec: &IsingSpec, twist: DiscreteTwist, lbp_cfg: &LbpConfig) -> Result<ExperimentBundle, ModelError> {
    let graph = ising_graph(spec)?;
    let order = reorder(&graph, spec.order);
    let oracle = if spec.width.min(spec.height) <= MAX_DP_WIDTH {
        OracleHook::IsingTransfer {
            width: spec.width,
            height: spec.height,
            coupling: spec.coupling,
            fields: spec.fields()?,
            periodic: spec.periodic,
        }
    } else {
        OracleHook::None
    };
    graph_bundle(graph, &order, twist, lbp_cfg, oracle)
}

/// Neighborhood of a CAR field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CarGraph {
    Lattice { width: usize, height: usize },
    Adjacency(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarSpec {
    pub graph: CarGraph,
    pub tau: f64,
    pub d: f64,
    pub convention: TauConvention,
    pub obs: ObsModel,
    pub trials: u32,
    pub order: OrderStrategy,
}

impl CarSpec {
    /// 10-trial binomial-logit observations on a lattice, `tau = 0.1`, `d = 1`.
    pub fn lattice(width: usize, height: usize) -> Self {
        CarSpec {
            graph: CarGraph::Lattice { width, height },
            tau: 0.1,
            d: 1.0,
            convention: TauConvention::CovarianceScale,
            obs: ObsModel::BinomialLogit,
            trials: 10,
            order: OrderStrategy::Identity,
        }
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        match &self.graph {
            CarGraph::Lattice { width, height } => lattice_adjacency(*width, *height),
            CarGraph::Adjacency(a) => a.clone(),
        }
    }

    pub fn prior(&self) -> Result<GaussianMrf, ModelError> {
        Ok(build_car(&CarConfig {
            adjacency: self.adjacency(),
            tau: self.tau,
            d: self.d,
            convention: self.convention,
        })?)
    }

    /// Deterministic simulated observations.
    pub fn simulate(&self, seed: u64) -> Result<ObsData, ModelError> {
        let prior = self.prior()?;
        let trials = vec![self.trials; prior.dim()];
        Ok(gmrf::simulate_data(&prior, &self.obs, &trials, &mut rng_from_seed(seed)).1)
    }

    /// Visiting order. Minimum-degree elimination orders are reversed so
    /// that the reversed-order factorization used for the conditionals
    /// eliminates in the fill-reducing order.
    pub fn visiting_order(&self, prior: &GaussianMrf) -> VariableOrder {
        let adj = prior.adjacency();
        let order = self.order.apply(&adj);
        match self.order {
            OrderStrategy::MinimumDegree => order.reversed(),
            _ => order,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CarTwist {
    None,
    Laplace,
}

/// CAR bundle. With `epsilon > 0` the Laplace twisting is regularized with
/// the prior conditional as safeguard.
pub fn car_bundle(spec: &CarSpec, data: &ObsData, twist: CarTwist, epsilon: f64) -> Result<ExperimentBundle, ModelError> {
    let prior = spec.prior()?;
    let order = spec.visiting_order(&prior);
    let oracle = match spec.obs {
        ObsModel::Gaussian { sigma } => OracleHook::GaussianMarginal { gmrf: prior.clone(), sigma, y: data.y.clone() },
        _ => OracleHook::None,
    };
    let mut notes = Vec::new();
    let (model, label, det) = match twist {
        CarTwist::None => (BundleModel::Gmrf(bootstrap_gmrf_model(&prior, &spec.obs, data, &order)?.0), "none", None),
        CarTwist::Laplace => {
            let la = laplace_fit(&prior, &spec.obs, data, LaplaceOptions::default())?;
            notes.push(format!("laplace: {} iterations, {} floored sites", la.iterations, la.floored_sites));
            let det = Some(approx_loglik(&la));
            if epsilon > 0.0 {
                let (approx, safeguard) = LaplaceTwisting::new(&prior, &spec.obs, data, &la, &order)?;
                let reg = Regularized::new(approx, safeguard, epsilon)?;
                (BundleModel::GmrfRegularized(Box::new(reg)), "laplace", det)
            } else {
                (BundleModel::Gmrf(twisted_gmrf_model(&prior, &spec.obs, data, &la, &order)?.0), "laplace", det)
            }
        }
    };
    Ok(ExperimentBundle { model, num_steps: prior.dim(), twist: label, deterministic_estimate: det, oracle, notes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LdaTwist {
    None,
    Ep,
}

/// Topics, vocabulary, Dirichlet concentration and word concentration of
/// the synthetic toy model, and the seeds of its topics and document.
pub const LDA_TOY: (usize, usize, f64, f64, u64, u64) = (4, 10, 1.0, 1.0, 1, 101);

/// Synthetic toy model with a document of `len` words.
pub fn lda_toy(len: usize) -> (LdaModel, Document) {
    let (k, v, alpha, conc, model_seed, doc_seed) = LDA_TOY;
    let model = LdaModel::random(k, v, alpha, conc, model_seed);
    let doc = model.sample_document(len, &mut rng_from_seed(doc_seed));
    (model, doc)
}

pub fn lda_bundle(model: &LdaModel, doc: &Document, twist: LdaTwist) -> Result<ExperimentBundle, ModelError> {
    let (ep, det, notes) = match twist {
        LdaTwist::None => (EpApprox::zero(model), None, Vec::new()),
        LdaTwist::Ep => {
            let ep = ep_fit(model, doc, EpOptions::default())?;
            let note = format!(
                "ep: {} sweeps, converged {}, {} skipped updates",
                ep.sweeps, ep.converged, ep.skipped_updates
            );
            let det = Some(ep.log_likelihood);
            (ep, det, vec![note])
        }
    };
    let states = (model.num_topics() as f64).powi(doc.len() as i32);
    let oracle = if states <= MAX_ENUMERATION_STATES as f64 {
        OracleHook::LdaEnumerate { model: model.clone(), doc: doc.clone() }
    } else {
        OracleHook::None
    };
    Ok(ExperimentBundle {
        model: BundleModel::Lda(LdaSequentialModel::new(model, doc, &ep)?),
        num_steps: doc.len(),
        twist: match twist {
            LdaTwist::None => "none",
            LdaTwist::Ep => "ep",
        },
        deterministic_estimate: det,
        oracle,
        notes,
    })
}
