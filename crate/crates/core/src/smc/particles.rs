//! Particle storage: per-step weights and ancestry, with either a dense
//! `T x N` position table or a pruned ancestral tree.

use super::SmcError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StorageKind {
    /// Full position and ancestor tables.
    #[default]
    Dense,
    /// Parent-pointer tree; branches without surviving descendants are
    /// dropped as the run proceeds.
    Tree,
}

const NO_PARENT: usize = usize::MAX;

#[derive(Debug, Clone)]
struct TreeStore<V> {
    values: Vec<V>,
    parents: Vec<usize>,
    leaves: Vec<usize>,
    gc_threshold: usize,
}

impl<V: Copy> TreeStore<V> {
    fn new() -> Self {
        TreeStore {
            values: Vec::new(),
            parents: Vec::new(),
            leaves: Vec::new(),
            gc_threshold: 0,
        }
    }

    fn push_step(&mut self, values: &[V], ancestors: &[usize]) {
        let first = self.leaves.is_empty();
        let mut leaves = Vec::with_capacity(values.len());
        for (i, &v) in values.iter().enumerate() {
            let parent = if first { NO_PARENT } else { self.leaves[ancestors[i]] };
            leaves.push(self.values.len());
            self.values.push(v);
            self.parents.push(parent);
        }
        self.leaves = leaves;
        if self.values.len() > self.gc_threshold {
            self.collect();
            self.gc_threshold = (2 * self.values.len()).max(8 * self.leaves.len());
        }
    }

    /// Drops nodes that no current leaf descends from. Parents always have
    /// smaller indices than children, so compaction keeps that order.
    fn collect(&mut self) {
        let len = self.values.len();
        let mut live = vec![false; len];
        for &leaf in &self.leaves {
            let mut node = leaf;
            while node != NO_PARENT && !live[node] {
                live[node] = true;
                node = self.parents[node];
            }
        }
        let mut remap = vec![NO_PARENT; len];
        let mut next = 0;
        for old in 0..len {
            if live[old] {
                remap[old] = next;
                self.values[next] = self.values[old];
                let p = self.parents[old];
                self.parents[next] = if p == NO_PARENT { NO_PARENT } else { remap[p] };
                next += 1;
            }
        }
        self.values.truncate(next);
        self.parents.truncate(next);
        for leaf in &mut self.leaves {
            *leaf = remap[*leaf];
        }
    }

    fn trajectory(&self, i: usize) -> Vec<V> {
        let mut path = Vec::new();
        let mut node = self.leaves[i];
        while node != NO_PARENT {
            path.push(self.values[node]);
            node = self.parents[node];
        }
        path.reverse();
        path
    }
}

#[derive(Debug, Clone)]
enum Paths<V> {
    Dense {
        positions: Vec<Vec<V>>,
        ancestors: Vec<Vec<usize>>,
    },
    Tree(TreeStore<V>),
}

/// State of a particle population across all completed steps.
#[derive(Debug, Clone)]
pub struct ParticleSystem<V> {
    n: usize,
    steps: usize,
    paths: Paths<V>,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
    history: Option<WeightHistory>,
}

#[derive(Debug, Clone, Default)]
struct WeightHistory {
    log_weights: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    log_omega: Vec<Vec<f64>>,
    log_nu: Vec<Option<Vec<f64>>>,
    ancestors: Vec<Vec<usize>>,
}

impl<V: Copy> ParticleSystem<V> {
    pub(crate) fn new(n: usize, storage: StorageKind, keep_history: bool) -> Self {
        let paths = match storage {
            StorageKind::Dense => Paths::Dense {
                positions: Vec::new(),
                ancestors: Vec::new(),
            },
            StorageKind::Tree => Paths::Tree(TreeStore::new()),
        };
        ParticleSystem {
            n,
            steps: 0,
            paths,
            log_weights: Vec::new(),
            weights: Vec::new(),
            history: keep_history.then(WeightHistory::default),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn push_step(
        &mut self,
        values: Vec<V>,
        ancestors: Vec<usize>,
        log_weights: Vec<f64>,
        weights: Vec<f64>,
        log_omega: Vec<f64>,
        log_nu: Option<Vec<f64>>,
    ) {
        if let Some(h) = &mut self.history {
            h.log_weights.push(log_weights.clone());
            h.weights.push(weights.clone());
            h.log_omega.push(log_omega);
            h.log_nu.push(log_nu);
            h.ancestors.push(ancestors.clone());
        }
        match &mut self.paths {
            Paths::Dense {
                positions,
                ancestors: table,
            } => {
                positions.push(values);
                table.push(ancestors);
            }
            Paths::Tree(tree) => tree.push_step(&values, &ancestors),
        }
        self.log_weights = log_weights;
        self.weights = weights;
        self.steps += 1;
    }

    pub fn num_particles(&self) -> usize {
        self.n
    }

    pub fn num_steps(&self) -> usize {
        self.steps
    }

    /// Unnormalized log weights `log w~` of the last step.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Normalized weights of the last step.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Particle positions at step `t` (dense storage only).
    pub fn positions(&self, t: usize) -> Option<&[V]> {
        match &self.paths {
            Paths::Dense { positions, .. } => positions.get(t).map(Vec::as_slice),
            Paths::Tree(_) => None,
        }
    }

    /// Ancestor indices used to propagate step `t`. Available with dense
    /// storage or when weight history is kept.
    pub fn ancestors(&self, t: usize) -> Option<&[usize]> {
        match (&self.paths, &self.history) {
            (Paths::Dense { ancestors, .. }, _) => ancestors.get(t).map(Vec::as_slice),
            (_, Some(h)) => h.ancestors.get(t).map(Vec::as_slice),
            _ => None,
        }
    }

    pub fn log_weights_at(&self, t: usize) -> Option<&[f64]> {
        self.history.as_ref()?.log_weights.get(t).map(Vec::as_slice)
    }

    pub fn weights_at(&self, t: usize) -> Option<&[f64]> {
        self.history.as_ref()?.weights.get(t).map(Vec::as_slice)
    }

    /// Log incremental weights `log omega_t` of step `t`.
    pub fn log_omega_at(&self, t: usize) -> Option<&[f64]> {
        self.history.as_ref()?.log_omega.get(t).map(Vec::as_slice)
    }

    /// Normalized log resampling probabilities used before step `t`, if
    /// resampling took place.
    pub fn log_nu_at(&self, t: usize) -> Option<&[f64]> {
        self.history.as_ref()?.log_nu.get(t)?.as_deref()
    }

    /// Follows the ancestry of final particle `i` back to the first step.
    pub fn reconstruct_trajectory(&self, i: usize) -> Result<Vec<V>, SmcError> {
        if i >= self.n {
            return Err(SmcError::IndexOutOfRange { index: i, n: self.n });
        }
        if self.steps == 0 {
            return Ok(Vec::new());
        }
        Ok(match &self.paths {
            Paths::Dense {
                positions,
                ancestors,
            } => {
                let mut path = Vec::with_capacity(self.steps);
                let mut idx = i;
                for t in (0..self.steps).rev() {
                    path.push(positions[t][idx]);
                    idx = ancestors[t][idx];
                }
                path.reverse();
                path
            }
            Paths::Tree(tree) => tree.trajectory(i),
        })
    }

    /// Number of stored tree nodes (tree storage only).
    pub fn stored_nodes(&self) -> Option<usize> {
        match &self.paths {
            Paths::Tree(tree) => Some(tree.values.len()),
            Paths::Dense { .. } => None,
        }
    }
}
