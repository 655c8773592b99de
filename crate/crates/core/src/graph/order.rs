//! Variable orderings.
//!
//! Orderings are computed on the variable-variable adjacency induced by shared
//! factors. The fill-reducing strategies return *elimination* orders: the
//! first variable listed is the first one eliminated by a Cholesky
//! factorization.

use super::{FactorGraph, GraphError};
use crate::rng::rng_from_seed;
use rand::seq::SliceRandom;
use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

/// A permutation of `0..T`: `variable(t)` is the variable visited at step `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableOrder {
    order: Vec<usize>,
    position: Vec<usize>,
}

impl VariableOrder {
    pub fn new(order: Vec<usize>) -> Result<Self, GraphError> {
        let n = order.len();
        let mut position = vec![usize::MAX; n];
        for (t, &v) in order.iter().enumerate() {
            if v >= n {
                return Err(GraphError::InvalidOrder(format!("index {v} out of range")));
            }
            if position[v] != usize::MAX {
                return Err(GraphError::InvalidOrder(format!("variable {v} repeated")));
            }
            position[v] = t;
        }
        Ok(VariableOrder { order, position })
    }

    pub fn identity(n: usize) -> Self {
        VariableOrder {
            order: (0..n).collect(),
            position: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn variable(&self, step: usize) -> usize {
        self.order[step]
    }

    pub fn position(&self, variable: usize) -> usize {
        self.position[variable]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.order
    }

    pub fn reversed(&self) -> Self {
        let mut order = self.order.clone();
        order.reverse();
        VariableOrder::new(order).expect("reverse of a permutation")
    }

    pub fn is_identity(&self) -> bool {
        self.order.iter().enumerate().all(|(t, &v)| t == v)
    }
}

/// Ordering strategies. Text form: `identity`, `reverse-cuthill-mckee`
/// (`rcm`), `approximate-minimum-degree` (`amd`, `minimum-degree`),
/// `random:<seed>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderStrategy {
    Identity,
    ReverseCuthillMcKee,
    MinimumDegree,
    Random(u64),
}

impl FromStr for OrderStrategy {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" | "left-to-right" | "row-major" => Ok(OrderStrategy::Identity),
            "reverse-cuthill-mckee" | "rcm" => Ok(OrderStrategy::ReverseCuthillMcKee),
            "approximate-minimum-degree" | "amd" | "minimum-degree" => {
                Ok(OrderStrategy::MinimumDegree)
            }
            _ => match s.strip_prefix("random:").or_else(|| s.strip_prefix("random(").and_then(|r| r.strip_suffix(')'))) {
                Some(seed) => seed
                    .trim()
                    .parse()
                    .map(OrderStrategy::Random)
                    .map_err(|_| GraphError::InvalidOrder(format!("bad random seed in {s:?}"))),
                None => Err(GraphError::InvalidOrder(format!("unknown order strategy {s:?}"))),
            },
        }
    }
}

impl fmt::Display for OrderStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderStrategy::Identity => write!(f, "identity"),
            OrderStrategy::ReverseCuthillMcKee => write!(f, "reverse-cuthill-mckee"),
            OrderStrategy::MinimumDegree => write!(f, "approximate-minimum-degree"),
            OrderStrategy::Random(seed) => write!(f, "random:{seed}"),
        }
    }
}

impl OrderStrategy {
    /// Applies the strategy to an explicit adjacency structure.
    pub fn apply(&self, adjacency: &[Vec<usize>]) -> VariableOrder {
        let n = adjacency.len();
        let order = match self {
            OrderStrategy::Identity => (0..n).collect(),
            OrderStrategy::ReverseCuthillMcKee => reverse_cuthill_mckee(adjacency),
            OrderStrategy::MinimumDegree => minimum_degree(adjacency),
            OrderStrategy::Random(seed) => {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng_from_seed(*seed));
                perm
            }
        };
        VariableOrder::new(order).expect("strategies produce permutations")
    }
}

/// Computes a variable order for `graph`.
pub fn reorder(graph: &FactorGraph, strategy: OrderStrategy) -> VariableOrder {
    strategy.apply(&graph.variable_adjacency())
}

/// Reverse Cuthill-McKee. Each connected component starts from a
/// pseudo-peripheral node of minimum degree; neighbors are visited in order
/// of increasing degree (ties by index).
pub fn reverse_cuthill_mckee(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    loop {
        let seed = match (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v))
        {
            Some(v) => v,
            None => break,
        };
        let start = pseudo_peripheral(adjacency, seed, &visited);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adjacency[v].iter().copied().filter(|&u| !visited[u]).collect();
            next.sort_by_key(|&u| (degree[u], u));
            for u in next {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adjacency: &[Vec<usize>], start: usize, blocked: &[bool]) -> Vec<Option<usize>> {
    let mut level = vec![None; adjacency.len()];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let lv = level[v].unwrap();
        for &u in &adjacency[v] {
            if !blocked[u] && level[u].is_none() {
                level[u] = Some(lv + 1);
                queue.push_back(u);
            }
        }
    }
    level
}

// George-Liu pseudo-peripheral node search.
fn pseudo_peripheral(adjacency: &[Vec<usize>], seed: usize, blocked: &[bool]) -> usize {
    let mut current = seed;
    let mut ecc = 0;
    loop {
        let levels = bfs_levels(adjacency, current, blocked);
        let depth = levels.iter().filter_map(|l| *l).max().unwrap_or(0);
        let candidate = (0..adjacency.len())
            .filter(|&v| levels[v] == Some(depth))
            .min_by_key(|&v| (adjacency[v].len(), v))
            .unwrap_or(current);
        if depth <= ecc {
            return current;
        }
        ecc = depth;
        current = candidate;
    }
}

/// Minimum-degree elimination order on the explicit elimination graph.
/// Degrees are exact (no approximate-degree bounds); ties go to the
/// smallest index.
pub fn minimum_degree(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut nbrs: Vec<BTreeSet<usize>> = adjacency
        .iter()
        .enumerate()
        .map(|(v, a)| a.iter().copied().filter(|&u| u != v).collect())
        .collect();
    let mut eliminated = vec![false; n];
    let mut buckets: BTreeSet<(usize, usize)> = (0..n).map(|v| (nbrs[v].len(), v)).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&(deg, v)) = buckets.iter().next() {
        buckets.remove(&(deg, v));
        eliminated[v] = true;
        order.push(v);
        let clique: Vec<usize> = nbrs[v].iter().copied().collect();
        for &a in &clique {
            buckets.remove(&(nbrs[a].len(), a));
            nbrs[a].remove(&v);
        }
        for (i, &a) in clique.iter().enumerate() {
            for &b in &clique[i + 1..] {
                nbrs[a].insert(b);
                nbrs[b].insert(a);
            }
        }
        for &a in &clique {
            buckets.insert((nbrs[a].len(), a));
        }
        nbrs[v].clear();
    }
    debug_assert!(eliminated.iter().all(|&e| e));
    order
}
