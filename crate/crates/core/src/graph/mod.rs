//! Factor-graph data model.
//!
//! A [`FactorGraph`] holds `T` variables, each discrete (0-based integer codes
//! `0..card`) or continuous scalar, and a list of factors. The unnormalized
//! joint density is the product of the factor values. Variable indices are
//! 0-based in memory and 1-based in the serialized form (see [`io`]).
//!
//! Ising spins are stored as codes: `0 -> -1`, `1 -> +1` (see [`spin`]).

mod io;
mod lump;
mod order;
mod partition;

pub use io::{read_graph, write_graph, FactorSpec, GraphDocument};
pub use lump::{lump, LumpMap, Lumped};
pub use order::{
    minimum_degree, reorder, reverse_cuthill_mckee, OrderStrategy, VariableOrder,
};
pub use partition::{partition_factors, FactorPartition};

use crate::math::{log_binomial_coefficient, logistic, softplus};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("factor {factor}: scope lists variable {variable} more than once")]
    DuplicateScopeIndex { factor: usize, variable: usize },
    #[error("factor {factor}: empty scope")]
    EmptyScope { factor: usize },
    #[error("factor {factor}: variable index {variable} out of range for T = {num_variables}")]
    OutOfRangeIndex {
        factor: usize,
        variable: usize,
        num_variables: usize,
    },
    #[error("graph is disconnected: variable {variable} is not reachable from variable 0")]
    DisconnectedGraph { variable: usize },
    #[error("factor {factor}: {reason}")]
    InvalidFactor { factor: usize, reason: String },
    #[error("variable {variable}: {reason}")]
    InvalidDomain { variable: usize, reason: String },
    #[error("invalid variable order: {0}")]
    InvalidOrder(String),
    #[error("invalid grouping: {0}")]
    InvalidGrouping(String),
    #[error("operation requires discrete variables, variable {variable} is continuous")]
    NotDiscrete { variable: usize },
}

/// Domain of a single variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Integer codes `0..cardinality`.
    Discrete(usize),
    /// A real scalar.
    Continuous,
}

impl Domain {
    pub fn cardinality(&self) -> Option<usize> {
        match self {
            Domain::Discrete(k) => Some(*k),
            Domain::Continuous => None,
        }
    }
}

/// Decodes an Ising spin code.
pub fn spin(code: usize) -> f64 {
    if code == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Registered factor families.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorKind {
    /// `exp(J s_i s_j)` on two binary spins.
    IsingPair { coupling: f64 },
    /// `exp(h s_i)` on one binary spin.
    IsingUnary { field: f64 },
    /// Dense nonnegative table, row-major over the scope (first scope
    /// variable most significant). Stored in log space.
    Table { log_values: Vec<f64> },
    /// `exp(-w/2 (x_i - x_j)^2)` on two continuous variables.
    GaussianPair { precision: f64 },
    /// `Binomial(y; n, logistic(x))` on one continuous variable.
    BinomialLogitObs { successes: u32, trials: u32 },
}

impl FactorKind {
    pub fn name(&self) -> &'static str {
        match self {
            FactorKind::IsingPair { .. } => "ising-pair",
            FactorKind::IsingUnary { .. } => "ising-unary",
            FactorKind::Table { .. } => "table",
            FactorKind::GaussianPair { .. } => "gaussian-pair",
            FactorKind::BinomialLogitObs { .. } => "binomial-logit-obs",
        }
    }

    /// Table kind from linear-space values.
    pub fn table(values: &[f64]) -> Self {
        FactorKind::Table {
            log_values: values.iter().map(|v| v.ln()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<usize>,
    kind: FactorKind,
    /// Row-major strides for table lookups (empty for continuous kinds).
    strides: Vec<usize>,
}

impl Factor {
    pub fn new(scope: Vec<usize>, kind: FactorKind) -> Self {
        Factor {
            scope,
            kind,
            strides: Vec::new(),
        }
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn kind(&self) -> &FactorKind {
        &self.kind
    }

    /// Log factor value on a discrete assignment of the scope.
    pub fn log_value_discrete(&self, states: &[usize]) -> f64 {
        match &self.kind {
            FactorKind::IsingPair { coupling } => coupling * spin(states[0]) * spin(states[1]),
            FactorKind::IsingUnary { field } => field * spin(states[0]),
            FactorKind::Table { log_values } => {
                let idx: usize = states
                    .iter()
                    .zip(&self.strides)
                    .map(|(&s, &st)| s * st)
                    .sum();
                log_values[idx]
            }
            _ => panic!("{} factor evaluated on a discrete assignment", self.kind.name()),
        }
    }

    /// Log factor value on a discrete assignment given by `state_of(k)`,
    /// the code of the `k`-th scope variable.
    pub fn log_value_by(&self, state_of: impl Fn(usize) -> usize) -> f64 {
        match &self.kind {
            FactorKind::IsingPair { coupling } => {
                coupling * spin(state_of(0)) * spin(state_of(1))
            }
            FactorKind::IsingUnary { field } => field * spin(state_of(0)),
            FactorKind::Table { log_values } => {
                let idx: usize = self
                    .strides
                    .iter()
                    .enumerate()
                    .map(|(k, &st)| state_of(k) * st)
                    .sum();
                log_values[idx]
            }
            _ => panic!("{} factor evaluated on a discrete assignment", self.kind.name()),
        }
    }

    /// Log factor value on a real-valued assignment. Discrete kinds read
    /// their arguments as integer codes.
    pub fn log_value(&self, xs: &[f64]) -> f64 {
        match &self.kind {
            FactorKind::GaussianPair { precision } => {
                let d = xs[0] - xs[1];
                -0.5 * precision * d * d
            }
            FactorKind::BinomialLogitObs { successes, trials } => {
                let y = *successes as f64;
                let n = *trials as f64;
                log_binomial_coefficient(*trials, *successes) + y * xs[0] - n * softplus(xs[0])
            }
            _ => {
                let states: Vec<usize> = xs.iter().map(|&x| x as usize).collect();
                self.log_value_discrete(&states)
            }
        }
    }

    pub fn value(&self, xs: &[f64]) -> f64 {
        self.log_value(xs).exp()
    }

    /// Success probability helper for the binomial family.
    pub fn binomial_mean(x: f64) -> f64 {
        logistic(x)
    }
}

/// A validated factor graph. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    domains: Vec<Domain>,
    factors: Vec<Factor>,
}

impl FactorGraph {
    /// Builds and validates a factor graph.
    pub fn new(domains: Vec<Domain>, factors: Vec<Factor>) -> Result<Self, GraphError> {
        let mut graph = FactorGraph { domains, factors };
        graph.validate()?;
        let cards: Vec<Option<usize>> = graph.domains.iter().map(Domain::cardinality).collect();
        for f in &mut graph.factors {
            if let FactorKind::Table { .. } = f.kind {
                let mut strides = vec![0; f.scope.len()];
                let mut acc = 1;
                for (k, &v) in f.scope.iter().enumerate().rev() {
                    strides[k] = acc;
                    acc *= cards[v].unwrap_or(1);
                }
                f.strides = strides;
            }
        }
        Ok(graph)
    }

    /// Checks every structural invariant: scope indices in range, nonempty
    /// duplicate-free scopes, factor kinds consistent with the domains,
    /// nonnegative factor values, and a connected variable-factor graph.
    pub fn validate(&self) -> Result<(), GraphError> {
        let t = self.domains.len();
        for (v, d) in self.domains.iter().enumerate() {
            if let Domain::Discrete(0) = d {
                return Err(GraphError::InvalidDomain {
                    variable: v,
                    reason: "discrete domain with zero states".into(),
                });
            }
        }
        for (j, f) in self.factors.iter().enumerate() {
            if f.scope.is_empty() {
                return Err(GraphError::EmptyScope { factor: j });
            }
            for (k, &v) in f.scope.iter().enumerate() {
                if v >= t {
                    return Err(GraphError::OutOfRangeIndex {
                        factor: j,
                        variable: v,
                        num_variables: t,
                    });
                }
                if f.scope[..k].contains(&v) {
                    return Err(GraphError::DuplicateScopeIndex {
                        factor: j,
                        variable: v,
                    });
                }
            }
            self.check_kind(j, f)?;
        }
        if t > 0 {
            let mut dsu = Dsu::new(t);
            for f in &self.factors {
                for w in f.scope.windows(2) {
                    dsu.union(w[0], w[1]);
                }
            }
            let root = dsu.find(0);
            if let Some(v) = (1..t).find(|&v| dsu.find(v) != root) {
                return Err(GraphError::DisconnectedGraph { variable: v });
            }
        }
        Ok(())
    }

    fn check_kind(&self, j: usize, f: &Factor) -> Result<(), GraphError> {
        let bad = |reason: &str| GraphError::InvalidFactor {
            factor: j,
            reason: reason.to_string(),
        };
        let binary = |v: usize| self.domains[v] == Domain::Discrete(2);
        let continuous = |v: usize| self.domains[v] == Domain::Continuous;
        match &f.kind {
            FactorKind::IsingPair { coupling } => {
                if f.scope.len() != 2 || !f.scope.iter().all(|&v| binary(v)) {
                    return Err(bad("ising-pair needs two binary variables"));
                }
                if !coupling.is_finite() {
                    return Err(bad("non-finite coupling"));
                }
            }
            FactorKind::IsingUnary { field } => {
                if f.scope.len() != 1 || !binary(f.scope[0]) {
                    return Err(bad("ising-unary needs one binary variable"));
                }
                if !field.is_finite() {
                    return Err(bad("non-finite field"));
                }
            }
            FactorKind::Table { log_values } => {
                let mut size = 1usize;
                for &v in &f.scope {
                    match self.domains[v] {
                        Domain::Discrete(k) => size = size.saturating_mul(k),
                        Domain::Continuous => {
                            return Err(bad("table factor on a continuous variable"))
                        }
                    }
                }
                if log_values.len() != size {
                    return Err(bad(&format!(
                        "table has {} entries, scope needs {}",
                        log_values.len(),
                        size
                    )));
                }
                if log_values.iter().any(|lv| lv.is_nan() || *lv == f64::INFINITY) {
                    return Err(bad("table values must be finite and nonnegative"));
                }
            }
            FactorKind::GaussianPair { precision } => {
                if f.scope.len() != 2 || !f.scope.iter().all(|&v| continuous(v)) {
                    return Err(bad("gaussian-pair needs two continuous variables"));
                }
                if !(*precision >= 0.0) || !precision.is_finite() {
                    return Err(bad("gaussian-pair precision must be finite and >= 0"));
                }
            }
            FactorKind::BinomialLogitObs { successes, trials } => {
                if f.scope.len() != 1 || !continuous(f.scope[0]) {
                    return Err(bad("binomial-logit-obs needs one continuous variable"));
                }
                if successes > trials {
                    return Err(bad("more successes than trials"));
                }
            }
        }
        Ok(())
    }

    pub fn num_variables(&self) -> usize {
        self.domains.len()
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, j: usize) -> &Factor {
        &self.factors[j]
    }

    /// Cardinalities of all variables, or the first continuous variable.
    pub fn cardinalities(&self) -> Result<Vec<usize>, GraphError> {
        self.domains
            .iter()
            .enumerate()
            .map(|(v, d)| d.cardinality().ok_or(GraphError::NotDiscrete { variable: v }))
            .collect()
    }

    pub fn is_discrete(&self) -> bool {
        self.domains.iter().all(|d| d.cardinality().is_some())
    }

    /// For each variable, the factors whose scope contains it.
    pub fn variable_factors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_variables()];
        for (j, f) in self.factors.iter().enumerate() {
            for &v in &f.scope {
                out[v].push(j);
            }
        }
        out
    }

    /// Variable-variable adjacency induced by shared factors (sorted,
    /// no self loops).
    pub fn variable_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_variables()];
        for f in &self.factors {
            for &a in &f.scope {
                for &b in &f.scope {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        for nb in &mut adj {
            nb.sort_unstable();
            nb.dedup();
        }
        adj
    }

    /// Log of the unnormalized joint density at a full discrete assignment.
    pub fn log_unnormalized(&self, x: &[usize]) -> f64 {
        let mut buf = Vec::with_capacity(4);
        self.factors
            .iter()
            .map(|f| {
                buf.clear();
                buf.extend(f.scope.iter().map(|&v| x[v]));
                f.log_value_discrete(&buf)
            })
            .sum()
    }
}

pub(crate) struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    pub(crate) fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}
