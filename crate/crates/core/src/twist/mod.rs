//! Twisted targets `gamma~_t = psi_t * gamma_t` over a sequential
//! decomposition of a discrete factor graph, together with exact
//! (enumerated) twisting, fully adapted proposals and the regularized
//! bounded-weight construction.

mod adapt;
mod optimal;
mod regularize;

pub use adapt::FullyAdapted;
pub use optimal::{optimal_twisting_enumerate, EnumeratedTwist, MAX_ENUMERATION_STATES};
pub use regularize::{ApproximateTwisting, Regularized, RegularizeError, Safeguard};

use crate::graph::{
    partition_factors, FactorGraph, FactorPartition, GraphError, VariableOrder,
};
use crate::smc::{FiniteSequentialModel, SequentialModel};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwistError {
    #[error("joint state space of {states} states exceeds the enumeration limit {limit}")]
    TooLargeForEnumeration { states: f64, limit: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Positive functions `psi_t` of path prefixes, in log space.
///
/// `log_psi` receives a prefix `x_0..x_t`. Prefixes of length zero or of
/// full length `T` have `psi = 1`.
pub trait TwistingSet<V = usize>: Sync {
    fn num_steps(&self) -> usize;

    fn log_psi(&self, prefix: &[V]) -> f64;

    /// `log psi_t(history ++ [x]) - log psi_{t-1}(history)`.
    fn log_psi_ratio(&self, history: &[V], x: V) -> f64
    where
        V: Copy,
    {
        let mut prefix = Vec::with_capacity(history.len() + 1);
        prefix.extend_from_slice(history);
        prefix.push(x);
        self.log_psi(&prefix) - self.log_psi(history)
    }
}

impl<V, S: TwistingSet<V> + Send> TwistingSet<V> for Arc<S> {
    fn num_steps(&self) -> usize {
        (**self).num_steps()
    }

    fn log_psi(&self, prefix: &[V]) -> f64 {
        (**self).log_psi(prefix)
    }

    fn log_psi_ratio(&self, history: &[V], x: V) -> f64
    where
        V: Copy,
    {
        (**self).log_psi_ratio(history, x)
    }
}

/// `psi_t = 1` for every `t`.
#[derive(Debug, Clone, Copy)]
pub struct UnitTwist {
    pub steps: usize,
}

impl<V> TwistingSet<V> for UnitTwist {
    fn num_steps(&self) -> usize {
        self.steps
    }

    fn log_psi(&self, _prefix: &[V]) -> f64 {
        0.0
    }

    fn log_psi_ratio(&self, _history: &[V], _x: V) -> f64 {
        0.0
    }
}

/// `psi_t` multiplied by a per-step constant `exp(log_scale[t])` for
/// intermediate steps (the full-length prefix keeps `psi = 1`).
#[derive(Debug, Clone)]
pub struct ScaledTwist<S> {
    pub inner: S,
    /// Indexed by prefix length minus one.
    pub log_scale: Vec<f64>,
}

impl<S> ScaledTwist<S> {
    fn offset(&self, len: usize, steps: usize) -> f64 {
        if len == 0 || len == steps {
            0.0
        } else {
            self.log_scale[len - 1]
        }
    }
}

impl<V: Copy, S: TwistingSet<V>> TwistingSet<V> for ScaledTwist<S> {
    fn num_steps(&self) -> usize {
        self.inner.num_steps()
    }

    fn log_psi(&self, prefix: &[V]) -> f64 {
        self.inner.log_psi(prefix) + self.offset(prefix.len(), self.num_steps())
    }

    fn log_psi_ratio(&self, history: &[V], x: V) -> f64 {
        let steps = self.num_steps();
        self.inner.log_psi_ratio(history, x) + self.offset(history.len() + 1, steps)
            - self.offset(history.len(), steps)
    }
}

/// A discrete factor graph visited in a fixed variable order: the
/// untwisted target sequence `gamma_t = prod_{j in F_0..F_t} phi_j`.
#[derive(Debug, Clone)]
pub struct SequentialGraph {
    graph: FactorGraph,
    order: VariableOrder,
    partition: FactorPartition,
    cards: Vec<usize>,
    /// Step index of every scope variable, per factor.
    scope_steps: Vec<Vec<usize>>,
}

impl SequentialGraph {
    pub fn new(graph: FactorGraph, order: VariableOrder) -> Result<Self, GraphError> {
        if order.len() != graph.num_variables() {
            return Err(GraphError::InvalidOrder(format!(
                "order has {} entries for {} variables",
                order.len(),
                graph.num_variables()
            )));
        }
        let var_cards = graph.cardinalities()?;
        let partition = partition_factors(&graph, &order);
        let cards = (0..order.len()).map(|t| var_cards[order.variable(t)]).collect();
        let scope_steps = graph
            .factors()
            .iter()
            .map(|f| f.scope().iter().map(|&v| order.position(v)).collect())
            .collect();
        Ok(SequentialGraph {
            graph,
            order,
            partition,
            cards,
            scope_steps,
        })
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn order(&self) -> &VariableOrder {
        &self.order
    }

    pub fn partition(&self) -> &FactorPartition {
        &self.partition
    }

    /// Domain size of the variable visited at step `t`.
    pub fn card(&self, t: usize) -> usize {
        self.cards[t]
    }

    /// Step indices of the scope of factor `j`.
    pub fn scope_steps(&self, j: usize) -> &[usize] {
        &self.scope_steps[j]
    }

    /// `log phi_j` with scope values read from the path `history ++ [x]`.
    pub fn log_factor(&self, j: usize, history: &[usize], x: usize) -> f64 {
        let t = history.len();
        let steps = &self.scope_steps[j];
        self.graph.factor(j).log_value_by(|k| {
            let s = steps[k];
            if s == t {
                x
            } else {
                history[s]
            }
        })
    }

    /// `sum_{j in F_t} log phi_j` for `t = history.len()`.
    pub fn log_step_factors(&self, history: &[usize], x: usize) -> f64 {
        self.partition
            .step(history.len())
            .iter()
            .map(|&j| self.log_factor(j, history, x))
            .sum()
    }

    /// Converts a path (values in visiting order) to an assignment indexed by
    /// variable.
    pub fn to_assignment(&self, path: &[usize]) -> Vec<usize> {
        let mut x = vec![0; path.len()];
        for (t, &v) in path.iter().enumerate() {
            x[self.order.variable(t)] = v;
        }
        x
    }
}

impl SequentialModel for SequentialGraph {
    type Value = usize;

    fn num_steps(&self) -> usize {
        self.cards.len()
    }

    fn log_increment(&self, history: &[usize], x: usize) -> f64 {
        self.log_step_factors(history, x)
    }
}

impl FiniteSequentialModel for SequentialGraph {
    fn step_cardinality(&self, t: usize) -> usize {
        self.cards[t]
    }
}

/// `log gamma~_t = log psi_t + sum_{j in F_0..F_t} log phi_j`.
#[derive(Debug, Clone)]
pub struct TwistedModel<S> {
    base: Arc<SequentialGraph>,
    twist: S,
}

impl<S: TwistingSet> TwistedModel<S> {
    pub fn new(base: Arc<SequentialGraph>, twist: S) -> Self {
        assert_eq!(
            twist.num_steps(),
            base.num_steps(),
            "twisting set and model disagree on the number of steps"
        );
        TwistedModel { base, twist }
    }

    pub fn base(&self) -> &SequentialGraph {
        &self.base
    }

    pub fn twist(&self) -> &S {
        &self.twist
    }

    /// `log gamma~_t` of a prefix evaluated directly (not by summing
    /// increments): factors in index order, then `log psi_t`.
    pub fn log_target(&self, prefix: &[usize]) -> f64 {
        let len = prefix.len();
        let partition = self.base.partition();
        let factors: f64 = (0..self.base.graph().num_factors())
            .filter(|&j| partition.entry_step(j) < len)
            .map(|j| {
                let steps = self.base.scope_steps(j);
                self.base.graph().factor(j).log_value_by(|k| prefix[steps[k]])
            })
            .sum();
        if len == self.base.num_steps() {
            factors
        } else {
            factors + self.twist.log_psi(prefix)
        }
    }
}

/// Builds the twisted model for `graph` visited in `order`.
pub fn make_twisted_model<S: TwistingSet>(
    graph: FactorGraph,
    order: VariableOrder,
    twist: S,
) -> Result<TwistedModel<S>, GraphError> {
    Ok(TwistedModel::new(
        Arc::new(SequentialGraph::new(graph, order)?),
        twist,
    ))
}

impl<S: TwistingSet> SequentialModel for TwistedModel<S> {
    type Value = usize;

    fn num_steps(&self) -> usize {
        self.base.num_steps()
    }

    fn log_increment(&self, history: &[usize], x: usize) -> f64 {
        self.base.log_step_factors(history, x) + self.twist.log_psi_ratio(history, x)
    }
}

impl<S: TwistingSet> FiniteSequentialModel for TwistedModel<S> {
    fn step_cardinality(&self, t: usize) -> usize {
        self.base.card(t)
    }
}
