use super::{FactorGraph, VariableOrder};

/// The sets `F_1..F_T`: factor `j` belongs to the step at which the last of
/// its scope variables is visited.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorPartition {
    steps: Vec<Vec<usize>>,
    entry: Vec<usize>,
}

impl FactorPartition {
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    /// Factors entering at step `t` (0-based).
    pub fn step(&self, t: usize) -> &[usize] {
        &self.steps[t]
    }

    pub fn steps(&self) -> &[Vec<usize>] {
        &self.steps
    }

    /// Step at which factor `j` enters the target sequence.
    pub fn entry_step(&self, j: usize) -> usize {
        self.entry[j]
    }

    /// Factors included up to and including step `t`.
    pub fn cumulative(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.steps[..=t].iter().flatten().copied()
    }

    /// Factors not yet included after step `t`.
    pub fn outside(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.steps[t + 1..].iter().flatten().copied()
    }
}

pub fn partition_factors(graph: &FactorGraph, order: &VariableOrder) -> FactorPartition {
    let t_len = graph.num_variables();
    assert_eq!(order.len(), t_len, "order length must match the graph");
    let mut steps = vec![Vec::new(); t_len];
    let mut entry = Vec::with_capacity(graph.num_factors());
    for (j, f) in graph.factors().iter().enumerate() {
        let t = f
            .scope()
            .iter()
            .map(|&v| order.position(v))
            .max()
            .expect("validated scopes are nonempty");
        steps[t].push(j);
        entry.push(t);
    }
    FactorPartition { steps, entry }
}
