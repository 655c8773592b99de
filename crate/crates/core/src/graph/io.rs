//! JSON serialization of factor graphs.
//!
//! ```json
//! {
//!   "T": 2,
//!   "domains": [2, "continuous"],
//!   "factors": [
//!     {"scope": [1], "kind": "ising-unary", "params": {"field": 0.3}},
//!     {"scope": [1, 2], "kind": "table", "params": {"values": [1, 2, 3, 4]}}
//!   ]
//! }
//! ```
//!
//! Scopes are 1-based. See `docs/formats.md` for every factor kind.

use super::{Domain, Factor, FactorGraph, FactorKind, GraphError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainSpec {
    Cardinality(usize),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub scope: Vec<usize>,
    pub kind: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    #[serde(rename = "T")]
    pub num_variables: usize,
    pub domains: Vec<DomainSpec>,
    pub factors: Vec<FactorSpec>,
}

#[derive(Deserialize)]
struct CouplingParams {
    coupling: f64,
}
#[derive(Deserialize)]
struct FieldParams {
    field: f64,
}
#[derive(Deserialize)]
struct TableParams {
    values: Vec<f64>,
}
#[derive(Deserialize)]
struct PrecisionParams {
    precision: f64,
}
#[derive(Deserialize)]
struct BinomialParams {
    successes: u32,
    trials: u32,
}

fn params<T: for<'de> Deserialize<'de>>(j: usize, v: &Value) -> Result<T, GraphError> {
    serde_json::from_value(v.clone()).map_err(|e| GraphError::InvalidFactor {
        factor: j,
        reason: format!("bad params: {e}"),
    })
}

impl GraphDocument {
    pub fn to_graph(&self) -> Result<FactorGraph, GraphError> {
        if self.domains.len() != self.num_variables {
            return Err(GraphError::InvalidDomain {
                variable: self.domains.len().min(self.num_variables),
                reason: format!(
                    "T = {} but {} domains listed",
                    self.num_variables,
                    self.domains.len()
                ),
            });
        }
        let domains = self
            .domains
            .iter()
            .enumerate()
            .map(|(v, d)| match d {
                DomainSpec::Cardinality(k) => Ok(Domain::Discrete(*k)),
                DomainSpec::Named(s) if s == "continuous" => Ok(Domain::Continuous),
                DomainSpec::Named(s) => Err(GraphError::InvalidDomain {
                    variable: v,
                    reason: format!("unknown domain {s:?}"),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut factors = Vec::with_capacity(self.factors.len());
        for (j, spec) in self.factors.iter().enumerate() {
            let mut scope = Vec::with_capacity(spec.scope.len());
            for &v in &spec.scope {
                if v == 0 || v > self.num_variables {
                    return Err(GraphError::OutOfRangeIndex {
                        factor: j,
                        variable: v,
                        num_variables: self.num_variables,
                    });
                }
                scope.push(v - 1);
            }
            let kind = match spec.kind.as_str() {
                "ising-pair" => FactorKind::IsingPair {
                    coupling: params::<CouplingParams>(j, &spec.params)?.coupling,
                },
                "ising-unary" => FactorKind::IsingUnary {
                    field: params::<FieldParams>(j, &spec.params)?.field,
                },
                "table" => FactorKind::table(&params::<TableParams>(j, &spec.params)?.values),
                "gaussian-pair" => FactorKind::GaussianPair {
                    precision: params::<PrecisionParams>(j, &spec.params)?.precision,
                },
                "binomial-logit-obs" => {
                    let p: BinomialParams = params(j, &spec.params)?;
                    FactorKind::BinomialLogitObs {
                        successes: p.successes,
                        trials: p.trials,
                    }
                }
                other => {
                    return Err(GraphError::InvalidFactor {
                        factor: j,
                        reason: format!("unknown factor kind {other:?}"),
                    })
                }
            };
            factors.push(Factor::new(scope, kind));
        }
        FactorGraph::new(domains, factors)
    }

    pub fn from_graph(graph: &FactorGraph) -> Self {
        let domains = graph
            .domains()
            .iter()
            .map(|d| match d {
                Domain::Discrete(k) => DomainSpec::Cardinality(*k),
                Domain::Continuous => DomainSpec::Named("continuous".into()),
            })
            .collect();
        let factors = graph
            .factors()
            .iter()
            .map(|f| {
                let params = match f.kind() {
                    FactorKind::IsingPair { coupling } => json!({ "coupling": coupling }),
                    FactorKind::IsingUnary { field } => json!({ "field": field }),
                    FactorKind::Table { log_values } => {
                        json!({ "values": log_values.iter().map(|l| l.exp()).collect::<Vec<_>>() })
                    }
                    FactorKind::GaussianPair { precision } => json!({ "precision": precision }),
                    FactorKind::BinomialLogitObs { successes, trials } => {
                        json!({ "successes": successes, "trials": trials })
                    }
                };
                FactorSpec {
                    scope: f.scope().iter().map(|v| v + 1).collect(),
                    kind: f.kind().name().to_string(),
                    params,
                }
            })
            .collect();
        GraphDocument {
            num_variables: graph.num_variables(),
            domains,
            factors,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GraphIoError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub fn read_graph(path: &Path) -> Result<FactorGraph, GraphIoError> {
    let text = std::fs::read_to_string(path).map_err(|source| GraphIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let doc: GraphDocument = serde_json::from_str(&text).map_err(|source| GraphIoError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    Ok(doc.to_graph()?)
}

pub fn write_graph(graph: &FactorGraph, path: &Path) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(&GraphDocument::from_graph(graph))
        .expect("graph documents always serialize");
    std::fs::write(path, text)
}
