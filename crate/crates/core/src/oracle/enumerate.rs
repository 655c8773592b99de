use super::{OracleError, OracleMethod, OracleResult};
use crate::graph::FactorGraph;
use crate::math::log_add;
use crate::twist::MAX_ENUMERATION_STATES;

fn for_each_state(cards: &[usize], mut f: impl FnMut(&[usize])) {
    let mut x = vec![0; cards.len()];
    'outer: loop {
        f(&x);
        for k in (0..cards.len()).rev() {
            x[k] += 1;
            if x[k] < cards[k] {
                continue 'outer;
            }
            x[k] = 0;
        }
        break;
    }
}

/// `log Z` by summing the unnormalized density over every joint state,
/// optionally with exact single-variable marginals.
pub fn enumerate_log_z(graph: &FactorGraph, marginals: bool) -> Result<OracleResult, OracleError> {
    let cards = graph
        .cardinalities()
        .map_err(|e| OracleError::NotDiscrete(e.to_string()))?;
    let states: f64 = cards.iter().map(|&c| c as f64).product();
    if states > MAX_ENUMERATION_STATES as f64 {
        return Err(OracleError::TooLargeForEnumeration {
            states,
            limit: MAX_ENUMERATION_STATES,
        });
    }
    let mut log_z = f64::NEG_INFINITY;
    for_each_state(&cards, |x| log_z = log_add(log_z, graph.log_unnormalized(x)));
    let marginals = marginals.then(|| {
        let mut m: Vec<Vec<f64>> = cards.iter().map(|&c| vec![0.0; c]).collect();
        for_each_state(&cards, |x| {
            let p = (graph.log_unnormalized(x) - log_z).exp();
            for (v, &xv) in x.iter().enumerate() {
                m[v][xv] += p;
            }
        });
        m
    });
    Ok(OracleResult {
        log_z,
        method: OracleMethod::Enumeration,
        marginals,
    })
}
