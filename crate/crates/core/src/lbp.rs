//! Loopy belief propagation on discrete factor graphs, and twisting
//! functions assembled from the converged factor-to-variable messages.
//!
//! Messages are stored normalized to sum one. Alongside each message the
//! log of the factor that was divided out is accumulated through the
//! recursion, so `normalized * exp(log_scale)` is the unnormalized message
//! produced by the plain sum-product equations started from all-ones
//! messages.

use crate::graph::{FactorGraph, GraphError};
use crate::smc::SequentialModel;
use crate::twist::{SequentialGraph, TwistingSet};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// All messages updated from the previous iteration's values.
    Synchronous,
    /// Factors visited in index order; each visit refreshes the incoming
    /// variable messages and then the outgoing factor messages.
    #[default]
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbpConfig {
    pub max_iterations: usize,
    /// Convergence threshold on the largest absolute message change.
    pub tolerance: f64,
    /// Linear damping `new = (1 - d) update + d old`, `d` in `[0, 1)`.
    pub damping: f64,
    pub schedule: Schedule,
}

impl Default for LbpConfig {
    fn default() -> Self {
        LbpConfig {
            max_iterations: 1000,
            tolerance: 1e-10,
            damping: 0.0,
            schedule: Schedule::Sequential,
        }
    }
}

/// Converged (or last) messages of a run.
#[derive(Debug, Clone)]
pub struct MessageSet {
    /// First edge of each factor; edge `edge_start[j] + k` joins factor `j`
    /// with the `k`-th variable of its scope.
    edge_start: Vec<usize>,
    edge_var: Vec<usize>,
    f2v: Vec<Vec<f64>>,
    f2v_log_scale: Vec<f64>,
    v2f: Vec<Vec<f64>>,
    v2f_log_scale: Vec<f64>,
    /// Edges incident to each variable.
    var_edges: Vec<Vec<usize>>,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

impl MessageSet {
    pub fn edge(&self, factor: usize, position: usize) -> usize {
        self.edge_start[factor] + position
    }

    /// Normalized factor-to-variable message.
    pub fn factor_to_variable(&self, factor: usize, position: usize) -> &[f64] {
        &self.f2v[self.edge(factor, position)]
    }

    /// Log of the constant removed from a factor-to-variable message.
    pub fn factor_to_variable_log_scale(&self, factor: usize, position: usize) -> f64 {
        self.f2v_log_scale[self.edge(factor, position)]
    }

    pub fn variable_to_factor(&self, factor: usize, position: usize) -> &[f64] {
        &self.v2f[self.edge(factor, position)]
    }

    pub fn variable_to_factor_log_scale(&self, factor: usize, position: usize) -> f64 {
        self.v2f_log_scale[self.edge(factor, position)]
    }

    pub fn num_variables(&self) -> usize {
        self.var_edges.len()
    }
}

/// Dense log tables of every factor over its scope, row-major.
struct FactorTables {
    log_phi: Vec<Vec<f64>>,
    cards: Vec<Vec<usize>>,
}

impl FactorTables {
    fn new(graph: &FactorGraph) -> Result<Self, GraphError> {
        let var_cards = graph.cardinalities()?;
        let mut log_phi = Vec::with_capacity(graph.num_factors());
        let mut cards = Vec::with_capacity(graph.num_factors());
        for f in graph.factors() {
            let c: Vec<usize> = f.scope().iter().map(|&v| var_cards[v]).collect();
            let size: usize = c.iter().product();
            let mut table = Vec::with_capacity(size);
            let mut digits = vec![0; c.len()];
            for _ in 0..size {
                table.push(f.log_value_by(|k| digits[k]));
                for k in (0..c.len()).rev() {
                    digits[k] += 1;
                    if digits[k] < c[k] {
                        break;
                    }
                    digits[k] = 0;
                }
            }
            log_phi.push(table);
            cards.push(c);
        }
        Ok(FactorTables { log_phi, cards })
    }
}

struct Engine<'a> {
    tables: FactorTables,
    graph: &'a FactorGraph,
    msgs: MessageSet,
    var_cards: Vec<usize>,
}

/// Normalizes `v` in place, returning the log of its former sum.
fn normalize(v: &mut [f64]) -> f64 {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    s.ln()
}

impl<'a> Engine<'a> {
    fn new(graph: &'a FactorGraph) -> Result<Self, GraphError> {
        let tables = FactorTables::new(graph)?;
        let var_cards = graph.cardinalities()?;
        let mut edge_start = Vec::with_capacity(graph.num_factors());
        let mut edge_var = Vec::new();
        let mut var_edges = vec![Vec::new(); graph.num_variables()];
        for f in graph.factors() {
            edge_start.push(edge_var.len());
            for &v in f.scope() {
                var_edges[v].push(edge_var.len());
                edge_var.push(v);
            }
        }
        let uniform = |v: usize| vec![1.0 / var_cards[v] as f64; var_cards[v]];
        let f2v: Vec<Vec<f64>> = edge_var.iter().map(|&v| uniform(v)).collect();
        let scale: Vec<f64> = edge_var.iter().map(|&v| (var_cards[v] as f64).ln()).collect();
        let msgs = MessageSet {
            edge_start,
            v2f: f2v.clone(),
            f2v,
            f2v_log_scale: scale.clone(),
            v2f_log_scale: scale,
            edge_var,
            var_edges,
            iterations: 0,
            converged: false,
            residual: f64::INFINITY,
        };
        Ok(Engine {
            tables,
            graph,
            msgs,
            var_cards,
        })
    }

    /// Variable-to-factor message along edge `e` from the current
    /// factor-to-variable messages.
    fn v2f_update(&self, e: usize) -> (Vec<f64>, f64) {
        let v = self.msgs.edge_var[e];
        let mut out = vec![1.0; self.var_cards[v]];
        let mut log_scale = 0.0;
        for &other in &self.msgs.var_edges[v] {
            if other == e {
                continue;
            }
            for (o, m) in out.iter_mut().zip(&self.msgs.f2v[other]) {
                *o *= m;
            }
            log_scale += self.msgs.f2v_log_scale[other];
            // renormalize as we go to avoid underflow on high-degree nodes
            log_scale += normalize(&mut out);
        }
        log_scale += normalize(&mut out);
        (out, log_scale)
    }

    /// Factor-to-variable messages of factor `j` to all scope positions.
    fn f2v_update(&self, j: usize) -> Vec<(Vec<f64>, f64)> {
        let table = &self.tables.log_phi[j];
        let cards = &self.tables.cards[j];
        let arity = cards.len();
        let start = self.msgs.edge_start[j];
        let max = table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut out: Vec<Vec<f64>> = cards.iter().map(|&c| vec![0.0; c]).collect();
        let mut digits = vec![0; arity];
        for &lp in table {
            let phi = (lp - max).exp();
            if phi > 0.0 {
                for k in 0..arity {
                    let mut prod = phi;
                    for (m, &d) in digits.iter().enumerate() {
                        if m != k {
                            prod *= self.msgs.v2f[start + m][d];
                        }
                    }
                    out[k][digits[k]] += prod;
                }
            }
            for k in (0..arity).rev() {
                digits[k] += 1;
                if digits[k] < cards[k] {
                    break;
                }
                digits[k] = 0;
            }
        }
        let incoming: f64 = (0..arity).map(|m| self.msgs.v2f_log_scale[start + m]).sum();
        out.into_iter()
            .enumerate()
            .map(|(k, mut msg)| {
                let ls = normalize(&mut msg);
                (msg, max + ls + incoming - self.msgs.v2f_log_scale[start + k])
            })
            .collect()
    }

    fn damp(old: &[f64], new: &mut [f64], d: f64) -> f64 {
        if d > 0.0 {
            for (n, o) in new.iter_mut().zip(old) {
                *n = (1.0 - d) * *n + d * o;
            }
            normalize(new);
        }
        new.iter()
            .zip(old)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn set_v2f(&mut self, e: usize, (mut msg, scale): (Vec<f64>, f64), d: f64) -> f64 {
        let r = Self::damp(&self.msgs.v2f[e], &mut msg, d);
        self.msgs.v2f[e] = msg;
        self.msgs.v2f_log_scale[e] = scale;
        r
    }

    fn set_f2v(&mut self, e: usize, (mut msg, scale): (Vec<f64>, f64), d: f64) -> f64 {
        let r = Self::damp(&self.msgs.f2v[e], &mut msg, d);
        self.msgs.f2v[e] = msg;
        self.msgs.f2v_log_scale[e] = scale;
        r
    }

    fn sweep(&mut self, cfg: &LbpConfig) -> f64 {
        let d = cfg.damping;
        let num_edges = self.msgs.edge_var.len();
        let mut residual: f64 = 0.0;
        match cfg.schedule {
            Schedule::Synchronous => {
                let v2f: Vec<_> = (0..num_edges).map(|e| self.v2f_update(e)).collect();
                let f2v: Vec<_> = (0..self.graph.num_factors())
                    .flat_map(|j| self.f2v_update(j))
                    .collect();
                for (e, m) in v2f.into_iter().enumerate() {
                    residual = residual.max(self.set_v2f(e, m, d));
                }
                for (e, m) in f2v.into_iter().enumerate() {
                    residual = residual.max(self.set_f2v(e, m, d));
                }
            }
            Schedule::Sequential => {
                for j in 0..self.graph.num_factors() {
                    let start = self.msgs.edge_start[j];
                    let arity = self.graph.factor(j).scope().len();
                    for e in start..start + arity {
                        let m = self.v2f_update(e);
                        residual = residual.max(self.set_v2f(e, m, d));
                    }
                    for (k, m) in self.f2v_update(j).into_iter().enumerate() {
                        residual = residual.max(self.set_f2v(start + k, m, d));
                    }
                }
            }
        }
        residual
    }
}

/// Runs sum-product message passing until the largest message change is at
/// most `cfg.tolerance` or `cfg.max_iterations` sweeps have been made.
pub fn run_lbp(graph: &FactorGraph, cfg: &LbpConfig) -> Result<MessageSet, GraphError> {
    let mut engine = Engine::new(graph)?;
    for it in 1..=cfg.max_iterations {
        let r = engine.sweep(cfg);
        engine.msgs.iterations = it;
        engine.msgs.residual = r;
        if r <= cfg.tolerance {
            engine.msgs.converged = true;
            break;
        }
    }
    Ok(engine.msgs)
}

/// Per-variable beliefs `∝ prod_j mu_{j->s}`, normalized.
pub fn beliefs(messages: &MessageSet) -> Vec<Vec<f64>> {
    messages
        .var_edges
        .iter()
        .map(|edges| {
            let card = messages.f2v[edges[0]].len();
            let mut b = vec![1.0; card];
            for &e in edges {
                for (bi, m) in b.iter_mut().zip(&messages.f2v[e]) {
                    *bi *= m;
                }
                normalize(&mut b);
            }
            b
        })
        .collect()
}

/// Twisting `psi_t = prod over factors not yet included of the messages
/// they send into the visited variables`.
#[derive(Debug, Clone)]
pub struct LbpTwist {
    steps: usize,
    /// Log normalized messages per edge.
    log_f2v: Vec<Vec<f64>>,
    log_scale: Vec<f64>,
    /// For every factor, `(step, edge)` per scope position.
    factor_edges: Vec<Vec<(usize, usize)>>,
    entry: Vec<usize>,
    /// Edges whose message enters `psi` when step `t` is visited.
    added: Vec<Vec<usize>>,
    /// `(step, edge)` pairs whose message leaves `psi` at step `t`.
    dropped: Vec<Vec<(usize, usize)>>,
    /// `log` of the removed normalization per prefix length.
    log_offset: Vec<f64>,
}

/// Builds the message-product twisting for `model`'s visiting order.
pub fn twisting_from_messages(messages: &MessageSet, model: &SequentialGraph) -> LbpTwist {
    let graph = model.graph();
    let partition = model.partition();
    let steps = model.num_steps();
    let log_f2v: Vec<Vec<f64>> = messages
        .f2v
        .iter()
        .map(|m| m.iter().map(|x| x.ln()).collect())
        .collect();
    let mut factor_edges = Vec::with_capacity(graph.num_factors());
    let mut added = vec![Vec::new(); steps];
    let mut dropped = vec![Vec::new(); steps];
    let mut delta_offset = vec![0.0; steps + 1];
    for j in 0..graph.num_factors() {
        let entry = partition.entry_step(j);
        let edges: Vec<(usize, usize)> = model
            .scope_steps(j)
            .iter()
            .enumerate()
            .map(|(k, &s)| (s, messages.edge(j, k)))
            .collect();
        for &(s, e) in &edges {
            if s < entry {
                added[s].push(e);
                dropped[entry].push((s, e));
                // the message contributes to prefixes of length s+1..=entry
                delta_offset[s + 1] += messages.f2v_log_scale[e];
                delta_offset[entry + 1] -= messages.f2v_log_scale[e];
            }
        }
        factor_edges.push(edges);
    }
    let mut log_offset = Vec::with_capacity(steps + 1);
    let mut acc = 0.0;
    for d in delta_offset {
        acc += d;
        log_offset.push(acc);
    }
    LbpTwist {
        steps,
        log_f2v,
        log_scale: messages.f2v_log_scale.clone(),
        factor_edges,
        entry: (0..graph.num_factors()).map(|j| partition.entry_step(j)).collect(),
        added,
        dropped,
        log_offset,
    }
}

impl LbpTwist {
    /// Log of the constant separating the normalized-message product from
    /// the unnormalized one at the given prefix length.
    pub fn log_normalization(&self, len: usize) -> f64 {
        self.log_offset[len]
    }

    /// `log psi` built from unnormalized messages.
    pub fn log_psi_unnormalized(&self, prefix: &[usize]) -> f64 {
        self.log_psi(prefix) + self.log_normalization(prefix.len())
    }

    pub fn log_message_scale(&self, edge: usize) -> f64 {
        self.log_scale[edge]
    }
}

impl TwistingSet for LbpTwist {
    fn num_steps(&self) -> usize {
        self.steps
    }

    fn log_psi(&self, prefix: &[usize]) -> f64 {
        let t = prefix.len();
        if t == 0 || t == self.steps {
            return 0.0;
        }
        let mut total = 0.0;
        for (j, edges) in self.factor_edges.iter().enumerate() {
            if self.entry[j] < t {
                continue;
            }
            for &(s, e) in edges {
                if s < t {
                    total += self.log_f2v[e][prefix[s]];
                }
            }
        }
        total
    }

    fn log_psi_ratio(&self, history: &[usize], x: usize) -> f64 {
        let t = history.len();
        let mut r = 0.0;
        for &e in &self.added[t] {
            r += self.log_f2v[e][x];
        }
        for &(s, e) in &self.dropped[t] {
            r -= self.log_f2v[e][history[s]];
        }
        r
    }
}
