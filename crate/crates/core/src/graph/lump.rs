//! Explicit grouping of variables into single SMC steps.

use super::{Domain, Factor, FactorGraph, FactorKind, GraphError};

/// Maps lumped-variable states back to the original variables. Within a
/// group the first listed variable is the most significant digit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LumpMap {
    groups: Vec<Vec<usize>>,
    cards: Vec<usize>,
}

impl LumpMap {
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Decodes a full lumped assignment into the original variables.
    pub fn decode(&self, lumped: &[usize]) -> Vec<usize> {
        let n: usize = self.groups.iter().map(Vec::len).sum();
        let mut out = vec![0; n];
        for (g, &code) in lumped.iter().enumerate() {
            self.decode_group(g, code, &mut out);
        }
        out
    }

    fn decode_group(&self, g: usize, mut code: usize, out: &mut [usize]) {
        for &v in self.groups[g].iter().rev() {
            out[v] = code % self.cards[v];
            code /= self.cards[v];
        }
    }
}

#[derive(Debug, Clone)]
pub struct Lumped {
    pub graph: FactorGraph,
    pub map: LumpMap,
}

/// Groups discrete variables into product-domain variables. `groups` must
/// partition `0..T`; every factor is re-expressed as a table over the groups
/// its scope touches.
pub fn lump(graph: &FactorGraph, groups: &[Vec<usize>]) -> Result<Lumped, GraphError> {
    let cards = graph.cardinalities()?;
    let n = graph.num_variables();
    let mut group_of = vec![usize::MAX; n];
    for (g, members) in groups.iter().enumerate() {
        if members.is_empty() {
            return Err(GraphError::InvalidGrouping(format!("group {g} is empty")));
        }
        for &v in members {
            if v >= n {
                return Err(GraphError::InvalidGrouping(format!("variable {v} out of range")));
            }
            if group_of[v] != usize::MAX {
                return Err(GraphError::InvalidGrouping(format!("variable {v} in two groups")));
            }
            group_of[v] = g;
        }
    }
    if let Some(v) = group_of.iter().position(|&g| g == usize::MAX) {
        return Err(GraphError::InvalidGrouping(format!("variable {v} not grouped")));
    }
    let map = LumpMap {
        groups: groups.to_vec(),
        cards: cards.clone(),
    };
    let group_cards: Vec<usize> = groups
        .iter()
        .map(|m| m.iter().map(|&v| cards[v]).product())
        .collect();

    let mut factors = Vec::with_capacity(graph.num_factors());
    let mut original = vec![0usize; n];
    for f in graph.factors() {
        let mut scope: Vec<usize> = f.scope().iter().map(|&v| group_of[v]).collect();
        scope.sort_unstable();
        scope.dedup();
        let size: usize = scope.iter().map(|&g| group_cards[g]).product();
        let mut values = Vec::with_capacity(size);
        let mut states = vec![0usize; f.scope().len()];
        for idx in 0..size {
            let mut rem = idx;
            for &g in scope.iter().rev() {
                map.decode_group(g, rem % group_cards[g], &mut original);
                rem /= group_cards[g];
            }
            for (k, &v) in f.scope().iter().enumerate() {
                states[k] = original[v];
            }
            values.push(f.log_value_discrete(&states));
        }
        factors.push(Factor::new(scope, FactorKind::Table { log_values: values }));
    }
    let domains = group_cards.into_iter().map(Domain::Discrete).collect();
    Ok(Lumped {
        graph: FactorGraph::new(domains, factors)?,
        map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lumping_preserves_joint() {
        let g = FactorGraph::new(
            vec![Domain::Discrete(2), Domain::Discrete(3), Domain::Discrete(2)],
            vec![
                Factor::new(vec![0, 1], FactorKind::table(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])),
                Factor::new(vec![1, 2], FactorKind::table(&[0.5, 1.5, 2.5, 3.5, 4.5, 5.5])),
                Factor::new(vec![2], FactorKind::IsingUnary { field: 0.3 }),
            ],
        )
        .unwrap();
        let lumped = lump(&g, &[vec![0, 2], vec![1]]).unwrap();
        assert_eq!(lumped.graph.domains(), &[Domain::Discrete(4), Domain::Discrete(3)]);
        for a in 0..4 {
            for b in 0..3 {
                let orig = lumped.map.decode(&[a, b]);
                let lhs = lumped.graph.log_unnormalized(&[a, b]);
                assert!((lhs - g.log_unnormalized(&orig)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bad_groupings_rejected() {
        let g = FactorGraph::new(
            vec![Domain::Discrete(2); 2],
            vec![Factor::new(vec![0, 1], FactorKind::table(&[1.0; 4]))],
        )
        .unwrap();
        assert!(lump(&g, &[vec![0]]).is_err());
        assert!(lump(&g, &[vec![0, 1], vec![1]]).is_err());
    }
}
