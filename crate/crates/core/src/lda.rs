//! Held-out document likelihood under latent Dirichlet allocation with known
//! topics: expectation propagation over the topic proportions, and
//! Rao-Blackwellized SMC over topic assignments with the proportions
//! integrated out.

use crate::math::{log_dirichlet_normalizer, log_sum_exp};
use crate::rng::{rng_from_seed, SmcRng};
use crate::smc::{run_smc, FiniteSequentialModel, SequentialModel, SmcConfig, SmcError, SmcResult};
use crate::twist::{FullyAdapted, MAX_ENUMERATION_STATES};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LdaError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("word id {word} outside vocabulary of size {vocab}")]
    WordOutOfRange { word: usize, vocab: usize },
    #[error("pseudo-count {value} at position {t}, topic {k} is not positive")]
    NonPositivePseudoCount { t: usize, k: usize, value: f64 },
    #[error("{states} topic assignments exceed the enumeration limit {limit}")]
    TooLargeForEnumeration { states: f64, limit: usize },
    #[error(transparent)]
    Smc(#[from] SmcError),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Topic model with known word distributions: `phi[w][k] = P(word w | topic k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub alpha: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
}

impl LdaModel {
    pub fn new(alpha: Vec<f64>, phi: Vec<Vec<f64>>) -> Result<Self, LdaError> {
        let m = LdaModel { alpha, phi };
        m.validate()?;
        Ok(m)
    }

    pub fn num_topics(&self) -> usize {
        self.alpha.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.phi.len()
    }

    pub fn validate(&self) -> Result<(), LdaError> {
        let k = self.num_topics();
        if k == 0 || self.alpha.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(LdaError::InvalidModel("alpha must be a nonempty positive vector".into()));
        }
        if self.phi.iter().any(|row| row.len() != k) {
            return Err(LdaError::InvalidModel(format!("every phi row needs {k} entries")));
        }
        for topic in 0..k {
            let mut total = 0.0;
            for row in &self.phi {
                if !(row[topic] >= 0.0) {
                    return Err(LdaError::InvalidModel(format!("negative phi in topic {}", topic + 1)));
                }
                total += row[topic];
            }
            if (total - 1.0).abs() > 1e-8 {
                return Err(LdaError::InvalidModel(format!("topic {} sums to {total}", topic + 1)));
            }
        }
        Ok(())
    }

    /// Random model: topics from a symmetric Dirichlet over words.
    pub fn random(topics: usize, vocab: usize, alpha: f64, word_concentration: f64, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut phi = vec![vec![0.0; topics]; vocab];
        for k in 0..topics {
            let col = dirichlet(&vec![word_concentration; vocab], &mut rng);
            for w in 0..vocab {
                phi[w][k] = col[w];
            }
        }
        LdaModel { alpha: vec![alpha; topics], phi }
    }

    /// Draws a document of `len` words from the generative model.
    pub fn sample_document(&self, len: usize, rng: &mut SmcRng) -> Document {
        let theta = dirichlet(&self.alpha, rng);
        let words = (0..len)
            .map(|_| {
                let k = categorical(&theta, rng);
                categorical(&self.phi.iter().map(|row| row[k]).collect::<Vec<_>>(), rng)
            })
            .collect();
        Document { words }
    }

    pub fn from_toml(text: &str) -> Result<Self, LdaError> {
        let m: LdaModel = toml::from_str(text).map_err(|e| LdaError::Parse(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model serializes")
    }

    pub fn read(path: &Path) -> Result<Self, LdaError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

fn dirichlet(a: &[f64], rng: &mut SmcRng) -> Vec<f64> {
    let g: Vec<f64> = a.iter().map(|&ak| Gamma::new(ak, 1.0).expect("positive shape").sample(rng)).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

fn categorical(p: &[f64], rng: &mut SmcRng) -> usize {
    let u: f64 = rng.random::<f64>() * p.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// A document as 0-based word ids in reading order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    pub words: Vec<usize>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Occurrences of each word id.
    pub fn counts(&self, vocab: usize) -> Vec<usize> {
        let mut c = vec![0; vocab];
        for &w in &self.words {
            c[w] += 1;
        }
        c
    }

    /// Whitespace-separated 1-based word ids.
    pub fn parse(text: &str) -> Result<Self, LdaError> {
        let words = text
            .split_whitespace()
            .map(|s| match s.parse::<usize>() {
                Ok(w) if w >= 1 => Ok(w - 1),
                _ => Err(LdaError::Parse(format!("bad word id {s:?}"))),
            })
            .collect::<Result<_, _>>()?;
        Ok(Document { words })
    }

    pub fn to_text(&self) -> String {
        self.words.iter().map(|w| (w + 1).to_string()).collect::<Vec<_>>().join(" ")
    }

    pub fn read(path: &Path) -> Result<Self, LdaError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn check(&self, model: &LdaModel) -> Result<(), LdaError> {
        match self.words.iter().find(|&&w| w >= model.vocab_size()) {
            Some(&w) => Err(LdaError::WordOutOfRange { word: w + 1, vocab: model.vocab_size() }),
            None => Ok(()),
        }
    }
}

/// Word-level approximate factors `s_w prod_k theta_k^{beta[w][k]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpApprox {
    pub beta: Vec<Vec<f64>>,
    pub log_s: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
    pub skipped_updates: usize,
    /// `log Z_EP`.
    pub log_likelihood: f64,
}

impl EpApprox {
    /// No twisting: `beta = 0`, `s = 1`.
    pub fn zero(model: &LdaModel) -> Self {
        EpApprox {
            beta: vec![vec![0.0; model.num_topics()]; model.vocab_size()],
            log_s: vec![0.0; model.vocab_size()],
            converged: true,
            sweeps: 0,
            skipped_updates: 0,
            log_likelihood: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpOptions {
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for EpOptions {
    fn default() -> Self {
        EpOptions { max_sweeps: 200, tol: 1e-10 }
    }
}

/// Pseudo-counts after every prefix: entry `t` is
/// `alpha + sum_{s >= t} beta[w_s]` (0-based positions), so entry `T` is
/// `alpha`.
fn prefix_pseudo_counts(alpha: &[f64], beta: &[Vec<f64>], doc: &Document) -> Vec<Vec<f64>> {
    let t_len = doc.len();
    let mut g = vec![alpha.to_vec(); t_len + 1];
    for t in (0..t_len).rev() {
        let w = doc.words[t];
        g[t] = g[t + 1].iter().zip(&beta[w]).map(|(a, b)| a + b).collect();
    }
    g
}

/// `g_t` for `0 <= t <= T`: pseudo-counts of the twisted target after the
/// first `t` words.
pub fn twisted_pseudo_counts(ep: &EpApprox, doc: &Document, alpha: &[f64], t: usize) -> Result<Vec<f64>, LdaError> {
    let mut g = alpha.to_vec();
    for &w in &doc.words[t..] {
        for (gk, b) in g.iter_mut().zip(&ep.beta[w]) {
            *gk += b;
        }
    }
    if let Some((k, &value)) = g.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(LdaError::NonPositivePseudoCount { t, k, value });
    }
    Ok(g)
}

/// Dirichlet matching the mean and the summed second moments of
/// `(sum_k theta_k phi_k) Dir(theta | a)`. Returns the matched parameter and
/// the log normalizer of the tilted density.
fn moment_match(a: &[f64], phi_w: &[f64]) -> Option<(Vec<f64>, f64)> {
    let total: f64 = a.iter().sum();
    let z: f64 = a.iter().zip(phi_w).map(|(ak, p)| ak * p).sum::<f64>() / total;
    if !(z > 0.0) {
        return None;
    }
    let r: Vec<f64> = a.iter().zip(phi_w).map(|(ak, p)| ak * p / (total * z)).collect();
    let mean: Vec<f64> = a.iter().zip(&r).map(|(ak, rk)| (ak + rk) / (total + 1.0)).collect();
    let denom = (total + 1.0) * (total + 2.0);
    let second: f64 = a
        .iter()
        .zip(&r)
        .map(|(&ak, &rk)| ((1.0 - rk) * ak * (ak + 1.0) + rk * (ak + 1.0) * (ak + 2.0)) / denom)
        .sum();
    let sum_sq: f64 = mean.iter().map(|m| m * m).sum();
    let mass = (1.0 - second) / (second - sum_sq);
    if !(mass > 0.0 && mass.is_finite()) {
        return None;
    }
    Some((mean.iter().map(|m| m * mass).collect(), z.ln()))
}

/// Expectation propagation with one approximate factor per vocabulary word,
/// updated once per occurrence, last word first. Updates that would make
/// any prefix pseudo-count nonpositive are skipped. After a sweep whose
/// largest change grows, later updates are damped by half.
pub fn ep_fit(model: &LdaModel, doc: &Document, opts: EpOptions) -> Result<EpApprox, LdaError> {
    model.validate()?;
    doc.check(model)?;
    let k = model.num_topics();
    let v = model.vocab_size();
    let counts = doc.counts(v);
    let mut ep = EpApprox::zero(model);
    if k == 1 {
        for w in 0..v {
            ep.log_s[w] = model.phi[w][0].ln();
        }
        ep.log_likelihood = doc.words.iter().map(|&w| ep.log_s[w]).sum();
        return Ok(ep);
    }
    let mut global = model.alpha.clone();
    let mut damping = 1.0;
    let mut last_change = f64::INFINITY;
    ep.converged = doc.is_empty();
    for sweep in 0..opts.max_sweeps {
        if doc.is_empty() {
            break;
        }
        ep.sweeps = sweep + 1;
        let mut change: f64 = 0.0;
        for t in (0..doc.len()).rev() {
            let w = doc.words[t];
            let n_w = counts[w] as f64;
            let cavity: Vec<f64> = global.iter().zip(&ep.beta[w]).map(|(g, b)| g - b).collect();
            if cavity.iter().any(|&c| !(c > 0.0)) {
                ep.skipped_updates += 1;
                continue;
            }
            let Some((matched, log_z)) = moment_match(&cavity, &model.phi[w]) else {
                ep.skipped_updates += 1;
                continue;
            };
            let new_beta: Vec<f64> = (0..k)
                .map(|j| {
                    let target = matched[j] - cavity[j];
                    ep.beta[w][j] + damping * (target - ep.beta[w][j])
                })
                .collect();
            let mut trial = ep.beta.clone();
            trial[w] = new_beta.clone();
            let g = prefix_pseudo_counts(&model.alpha, &trial, doc);
            if g.iter().flatten().any(|&x| !(x > 0.0)) {
                ep.skipped_updates += 1;
                continue;
            }
            for j in 0..k {
                change = change.max((new_beta[j] - ep.beta[w][j]).abs());
                global[j] += n_w * (new_beta[j] - ep.beta[w][j]);
            }
            let with_site: Vec<f64> = cavity.iter().zip(&new_beta).map(|(c, b)| c + b).collect();
            ep.log_s[w] = log_z - (log_dirichlet_normalizer(&with_site) - log_dirichlet_normalizer(&cavity));
            ep.beta[w] = new_beta;
        }
        if change <= opts.tol {
            ep.converged = true;
            break;
        }
        if change >= last_change {
            damping = 0.5;
        }
        last_change = change;
    }
    ep.log_likelihood = ep_log_likelihood(model, doc, &ep);
    Ok(ep)
}

/// `log [ B(g_0) / B(alpha) prod_t s_{w_t} ]`.
pub fn ep_log_likelihood(model: &LdaModel, doc: &Document, ep: &EpApprox) -> f64 {
    let g0 = prefix_pseudo_counts(&model.alpha, &ep.beta, doc).swap_remove(0);
    log_dirichlet_normalizer(&g0) - log_dirichlet_normalizer(&model.alpha)
        + doc.words.iter().map(|&w| ep.log_s[w]).sum::<f64>()
}

/// Topic assignments with the proportions integrated out, under the
/// twisted targets `B(g_t + m(x_{1:t})) / B(alpha) prod_s phi[w_s][x_s]`.
#[derive(Debug, Clone)]
pub struct LdaSequentialModel {
    log_phi: Vec<Vec<f64>>,
    pseudo: Vec<Vec<f64>>,
    log_b_alpha: f64,
}

impl LdaSequentialModel {
    pub fn new(model: &LdaModel, doc: &Document, ep: &EpApprox) -> Result<Self, LdaError> {
        model.validate()?;
        doc.check(model)?;
        let pseudo: Vec<Vec<f64>> = (0..=doc.len())
            .map(|t| twisted_pseudo_counts(ep, doc, &model.alpha, t))
            .collect::<Result<_, _>>()?;
        Ok(LdaSequentialModel {
            log_phi: doc.words.iter().map(|&w| model.phi[w].iter().map(|p| p.ln()).collect()).collect(),
            pseudo,
            log_b_alpha: log_dirichlet_normalizer(&model.alpha),
        })
    }

    pub fn pseudo_counts(&self, t: usize) -> &[f64] {
        &self.pseudo[t]
    }

    fn log_b_with_counts(&self, t: usize, counts: &[f64]) -> f64 {
        let a: Vec<f64> = self.pseudo[t].iter().zip(counts).map(|(g, m)| g + m).collect();
        log_dirichlet_normalizer(&a)
    }

    /// Proposal probabilities `q_t(k) ∝ phi[w_t][k] (g_{t+1,k} + m_k)`
    /// after the given history.
    pub fn proposal_probabilities(&self, history: &[usize]) -> Vec<f64> {
        let (incr, lse) = FullyAdapted::increments(self, history);
        incr.iter().map(|l| (l - lse).exp()).collect()
    }
}

impl SequentialModel for LdaSequentialModel {
    type Value = usize;

    fn num_steps(&self) -> usize {
        self.log_phi.len()
    }

    fn log_increment(&self, history: &[usize], x: usize) -> f64 {
        let t = history.len();
        let mut m = vec![0.0; self.pseudo[0].len()];
        for &h in history {
            m[h] += 1.0;
        }
        let prev = if t == 0 { self.log_b_alpha } else { self.log_b_with_counts(t, &m) };
        m[x] += 1.0;
        self.log_phi[t][x] + self.log_b_with_counts(t + 1, &m) - prev
    }
}

impl FiniteSequentialModel for LdaSequentialModel {
    fn step_cardinality(&self, _t: usize) -> usize {
        self.pseudo[0].len()
    }
}

/// Log-likelihood estimate from Rao-Blackwellized SMC with locally optimal
/// proposals. Pass [`EpApprox::zero`] for the untwisted sampler.
pub fn rb_smc_loglik(
    model: &LdaModel,
    doc: &Document,
    ep: &EpApprox,
    cfg: &SmcConfig,
) -> Result<SmcResult<usize>, LdaError> {
    let m = LdaSequentialModel::new(model, doc, ep)?;
    Ok(run_smc(&m, &FullyAdapted { lookahead: false }, cfg)?)
}

/// Exact `log p(w_{1:T})` by summing over all `K^T` topic assignments.
pub fn exact_loglik_enumerate(model: &LdaModel, doc: &Document) -> Result<f64, LdaError> {
    model.validate()?;
    doc.check(model)?;
    let k = model.num_topics();
    let t_len = doc.len();
    let states = (k as f64).powi(t_len as i32);
    if states > MAX_ENUMERATION_STATES as f64 {
        return Err(LdaError::TooLargeForEnumeration { states, limit: MAX_ENUMERATION_STATES });
    }
    let log_b_alpha = log_dirichlet_normalizer(&model.alpha);
    let mut x = vec![0usize; t_len];
    let mut terms = Vec::with_capacity(states as usize);
    loop {
        let mut a = model.alpha.clone();
        let mut lp = 0.0;
        for (t, &xt) in x.iter().enumerate() {
            a[xt] += 1.0;
            lp += model.phi[doc.words[t]][xt].ln();
        }
        terms.push(lp + log_dirichlet_normalizer(&a) - log_b_alpha);
        let mut pos = t_len;
        loop {
            if pos == 0 {
                return Ok(log_sum_exp(&terms));
            }
            pos -= 1;
            x[pos] += 1;
            if x[pos] < k {
                break;
            }
            x[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_match_is_identity_for_flat_factor() {
        let a = [0.7, 1.3, 2.0];
        let (m, log_z) = moment_match(&a, &[0.2, 0.2, 0.2]).unwrap();
        for (x, y) in m.iter().zip(&a) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!((log_z - 0.2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn document_text_round_trip() {
        let d = Document::parse("3 1 2\n2").unwrap();
        assert_eq!(d.words, vec![2, 0, 1, 1]);
        assert_eq!(Document::parse(&d.to_text()).unwrap(), d);
        assert!(Document::parse("0 1").is_err());
    }
}
