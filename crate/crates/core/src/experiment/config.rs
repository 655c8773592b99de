//! TOML run configuration.

use crate::gmrf::{read_adjacency, read_observations, ObsData, ObsModel, TauConvention};
use crate::graph::read_graph;
use crate::graph::OrderStrategy;
use crate::lbp::LbpConfig;
use crate::lda::{Document, LdaModel};
use crate::models::{
    car_bundle, discrete_oracle, graph_bundle, ising_bundle, lda_bundle, CarGraph, CarSpec, CarTwist, DiscreteTwist,
    ExperimentBundle, FieldSpec, IsingSpec, LdaTwist, ModelError, LDA_TOY,
};
use crate::graph::reorder;
use crate::rng::rng_from_seed;
use crate::smc::ResamplingScheme;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("building the model: {0}")]
    Model(#[from] ModelError),
    #[error("loading an input file: {0}")]
    Input(String),
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Ising,
    Car,
    Lda,
    CustomGraph,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Ising => "ising",
            Experiment::Car => "car",
            Experiment::Lda => "lda",
            Experiment::CustomGraph => "custom-graph",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SmcBase,
    SmcTwist,
    SisTwist,
}

impl Method {
    pub fn is_twisted(self) -> bool {
        !matches!(self, Method::SmcBase)
    }

    pub fn is_sis(self) -> bool {
        matches!(self, Method::SisTwist)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::SmcBase => "smc-base",
            Method::SmcTwist => "smc-twist",
            Method::SisTwist => "sis-twist",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smc-base" => Ok(Method::SmcBase),
            "smc-twist" => Ok(Method::SmcTwist),
            "sis-twist" => Ok(Method::SisTwist),
            _ => Err(format!("unknown method `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    #[default]
    Auto,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingSection {
    pub width: usize,
    pub height: usize,
    #[serde(default = "yes")]
    pub periodic: bool,
    pub coupling: f64,
    #[serde(default)]
    pub field_seed: Option<u64>,
    /// Explicit row-major field vector; overrides `field_seed`.
    #[serde(default)]
    pub field: Option<Vec<f64>>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarSection {
    #[serde(default)]
    pub width: Option<usize>,
    #[serde(default)]
    pub height: Option<usize>,
    /// Edge-list file (1-based `i j` pairs); replaces the lattice.
    #[serde(default)]
    pub adjacency_file: Option<PathBuf>,
    pub tau: f64,
    #[serde(default = "one")]
    pub d: f64,
    #[serde(default)]
    pub tau_convention: TauConvention,
    #[serde(default = "binomial")]
    pub observation: ObsModel,
    #[serde(default = "ten")]
    pub trials: u32,
    /// Seed of the simulated latent field and observations.
    #[serde(default)]
    pub data_seed: Option<u64>,
    /// Observation file (`t y [n]` lines); replaces simulation.
    #[serde(default)]
    pub observations_file: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}
fn ten() -> u32 {
    10
}
fn binomial() -> ObsModel {
    ObsModel::BinomialLogit
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdaSection {
    /// TOML model file; when absent a random model is generated.
    #[serde(default)]
    pub model_file: Option<PathBuf>,
    #[serde(default)]
    pub topics: Option<usize>,
    #[serde(default)]
    pub vocab: Option<usize>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub word_concentration: Option<f64>,
    #[serde(default)]
    pub model_seed: Option<u64>,
    /// Whitespace-separated 1-based word ids; when absent a document is sampled.
    #[serde(default)]
    pub document_file: Option<PathBuf>,
    #[serde(default)]
    pub doc_len: Option<usize>,
    #[serde(default)]
    pub doc_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    /// JSON factor-graph file.
    pub file: PathBuf,
}

/// A parsed run configuration. Relative paths are resolved against `base_dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub methods: Vec<Method>,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "identity")]
    pub order: String,
    #[serde(default = "half")]
    pub ess_threshold: f64,
    #[serde(default)]
    pub resampling: ResamplingScheme,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub oracle: OracleMode,
    /// Output stem; `<stem>.csv` and `<stem>.meta.json` are written.
    pub output: PathBuf,
    /// Record wall-clock time per run. Off by default so that reruns are
    /// byte-identical.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub lbp: Option<LbpConfig>,
    #[serde(default)]
    pub ising: Option<IsingSection>,
    #[serde(default)]
    pub car: Option<CarSection>,
    #[serde(default)]
    pub lda: Option<LdaSection>,
    #[serde(default)]
    pub graph: Option<GraphSection>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn identity() -> String {
    "identity".into()
}
fn half() -> f64 {
    0.5
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configurations always serialize")
    }

    /// First 12 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    pub fn order_strategy(&self) -> Result<OrderStrategy, ConfigError> {
        self.order.parse().map_err(|e: crate::graph::GraphError| invalid("order", e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.methods.is_empty() {
            return Err(invalid("methods", "at least one method is required"));
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(invalid("N", "needs at least one entry, each at least 1"));
        }
        if self.replications == 0 {
            return Err(invalid("replications", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.ess_threshold) {
            return Err(invalid("ess_threshold", format!("{} is outside [0, 1]", self.ess_threshold)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon", "must be finite and nonnegative"));
        }
        if self.epsilon > 0.0 && self.experiment != Experiment::Car {
            return Err(invalid("epsilon", "regularization is only available for the car experiment"));
        }
        let order = self.order_strategy()?;
        let section_present = match self.experiment {
            Experiment::Ising => self.ising.is_some(),
            Experiment::Car => self.car.is_some(),
            Experiment::Lda => self.lda.is_some(),
            Experiment::CustomGraph => self.graph.is_some(),
        };
        if !section_present {
            let name = match self.experiment {
                Experiment::Ising => "ising",
                Experiment::Car => "car",
                Experiment::Lda => "lda",
                Experiment::CustomGraph => "graph",
            };
            return Err(ConfigError::Invalid {
                field: "experiment",
                message: format!("experiment `{}` needs a [{name}] section", self.experiment),
            });
        }
        if self.experiment == Experiment::Lda && order != OrderStrategy::Identity {
            return Err(invalid("order", "documents are always visited in word order"));
        }
        if let Some(car) = &self.car {
            let lattice = car.width.is_some() && car.height.is_some();
            if lattice == car.adjacency_file.is_some() {
                return Err(invalid("car", "give either width and height or adjacency_file"));
            }
            if car.observations_file.is_none() && car.data_seed.is_none() {
                return Err(invalid("car.data_seed", "needed when no observations_file is given"));
            }
        }
        Ok(())
    }

    /// Builds the model for one method.
    pub fn bundle(&self, method: Method) -> Result<ExperimentBundle, ConfigError> {
        let order = self.order_strategy()?;
        let lbp = self.lbp.unwrap_or_default();
        let twisted = method.is_twisted();
        Ok(match self.experiment {
            Experiment::Ising => {
                let sec = self.ising.as_ref().expect("validated");
                let field = match (&sec.field, sec.field_seed) {
                    (Some(h), _) => FieldSpec::Explicit(h.clone()),
                    (None, Some(s)) => FieldSpec::Seed(s),
                    (None, None) => return Err(invalid("ising.field_seed", "give field_seed or field")),
                };
                let spec = IsingSpec {
                    width: sec.width,
                    height: sec.height,
                    periodic: sec.periodic,
                    coupling: sec.coupling,
                    field,
                    order,
                };
                ising_bundle(&spec, if twisted { DiscreteTwist::Lbp } else { DiscreteTwist::None }, &lbp)?
            }
            Experiment::CustomGraph => {
                let sec = self.graph.as_ref().expect("validated");
                let graph = read_graph(&self.resolve(&sec.file)).map_err(|e| ConfigError::Input(e.to_string()))?;
                if graph.cardinalities().is_err() {
                    return Err(invalid("graph.file", "custom graphs must have discrete variables only"));
                }
                let ord = reorder(&graph, order);
                let oracle = discrete_oracle(&graph);
                graph_bundle(graph, &ord, if twisted { DiscreteTwist::Lbp } else { DiscreteTwist::None }, &lbp, oracle)?
            }
            Experiment::Car => {
                let (spec, data) = self.car_spec()?;
                car_bundle(&spec, &data, if twisted { CarTwist::Laplace } else { CarTwist::None }, self.epsilon)?
            }
            Experiment::Lda => {
                let (model, doc) = self.lda_inputs()?;
                lda_bundle(&model, &doc, if twisted { LdaTwist::Ep } else { LdaTwist::None })?
            }
        })
    }

    pub fn car_spec(&self) -> Result<(CarSpec, ObsData), ConfigError> {
        let sec = self.car.as_ref().ok_or_else(|| invalid("car", "missing section"))?;
        let graph = match (&sec.adjacency_file, sec.width, sec.height) {
            (Some(p), _, _) => CarGraph::Adjacency(
                read_adjacency(&self.resolve(p), None).map_err(|e| ConfigError::Input(e.to_string()))?,
            ),
            (None, Some(width), Some(height)) => CarGraph::Lattice { width, height },
            _ => return Err(invalid("car", "give either width and height or adjacency_file")),
        };
        let spec = CarSpec {
            graph,
            tau: sec.tau,
            d: sec.d,
            convention: sec.tau_convention,
            obs: sec.observation,
            trials: sec.trials,
            order: self.order_strategy()?,
        };
        let data = match (&sec.observations_file, sec.data_seed) {
            (Some(p), _) => {
                read_observations(&self.resolve(p), sec.trials).map_err(|e| ConfigError::Input(e.to_string()))?
            }
            (None, Some(seed)) => spec.simulate(seed)?,
            (None, None) => return Err(invalid("car.data_seed", "needed when no observations_file is given")),
        };
        Ok((spec, data))
    }

    pub fn lda_inputs(&self) -> Result<(LdaModel, Document), ConfigError> {
        let sec = self.lda.as_ref().ok_or_else(|| invalid("lda", "missing section"))?;
        let (k, v, alpha, conc, model_seed, doc_seed) = LDA_TOY;
        let model = match &sec.model_file {
            Some(p) => LdaModel::read(&self.resolve(p)).map_err(|e| ConfigError::Input(e.to_string()))?,
            None => LdaModel::random(
                sec.topics.unwrap_or(k),
                sec.vocab.unwrap_or(v),
                sec.alpha.unwrap_or(alpha),
                sec.word_concentration.unwrap_or(conc),
                sec.model_seed.unwrap_or(model_seed),
            ),
        };
        model.validate().map_err(|e| invalid("lda", e.to_string()))?;
        let doc = match &sec.document_file {
            Some(p) => Document::read(&self.resolve(p)).map_err(|e| ConfigError::Input(e.to_string()))?,
            None => {
                let len = sec.doc_len.ok_or_else(|| invalid("lda.doc_len", "needed when no document_file is given"))?;
                model.sample_document(len, &mut rng_from_seed(sec.doc_seed.unwrap_or(doc_seed)))
            }
        };
        Ok((model, doc))
    }
}
