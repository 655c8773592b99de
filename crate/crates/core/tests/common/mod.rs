#![allow(dead_code)]

use rand::Rng;
use twisted_smc::graph::{Domain, Factor, FactorGraph, FactorKind};
use twisted_smc::math::log_sum_exp;
use twisted_smc::rng::rng_from_seed;

fn random_table(rng: &mut impl Rng, size: usize) -> FactorKind {
    let values: Vec<f64> = (0..size).map(|_| rng.random_range(0.1..2.0)).collect();
    FactorKind::table(&values)
}

/// Binary (or `card`-ary) chain with random unary and pairwise tables.
pub fn random_chain(len: usize, card: usize, seed: u64) -> FactorGraph {
    let mut rng = rng_from_seed(seed);
    let mut factors = Vec::new();
    for i in 0..len {
        factors.push(Factor::new(vec![i], random_table(&mut rng, card)));
        if i + 1 < len {
            factors.push(Factor::new(vec![i, i + 1], random_table(&mut rng, card * card)));
        }
    }
    FactorGraph::new(vec![Domain::Discrete(card); len], factors).unwrap()
}

/// Random tree: variable `i > 0` attaches to a uniformly chosen earlier
/// variable. Every variable carries a unary table.
pub fn random_tree(n: usize, seed: u64) -> FactorGraph {
    let mut rng = rng_from_seed(seed);
    let mut factors = Vec::new();
    for i in 0..n {
        factors.push(Factor::new(vec![i], random_table(&mut rng, 2)));
        if i > 0 {
            let parent = rng.random_range(0..i);
            factors.push(Factor::new(vec![parent, i], random_table(&mut rng, 4)));
        }
    }
    FactorGraph::new(vec![Domain::Discrete(2); n], factors).unwrap()
}

/// Ising lattice built independently of the library's constructor.
pub fn ising(width: usize, height: usize, coupling: f64, fields: &[f64], periodic: bool) -> FactorGraph {
    let idx = |r: usize, c: usize| r * width + c;
    let mut factors = Vec::new();
    for r in 0..height {
        for c in 0..width {
            if c + 1 < width {
                factors.push(Factor::new(vec![idx(r, c), idx(r, c + 1)], FactorKind::IsingPair { coupling }));
            } else if periodic && width >= 3 {
                factors.push(Factor::new(vec![idx(r, 0), idx(r, c)], FactorKind::IsingPair { coupling }));
            }
            if r + 1 < height {
                factors.push(Factor::new(vec![idx(r, c), idx(r + 1, c)], FactorKind::IsingPair { coupling }));
            } else if periodic && height >= 3 {
                factors.push(Factor::new(vec![idx(0, c), idx(r, c)], FactorKind::IsingPair { coupling }));
            }
            factors.push(Factor::new(vec![idx(r, c)], FactorKind::IsingUnary { field: fields[idx(r, c)] }));
        }
    }
    FactorGraph::new(vec![Domain::Discrete(2); width * height], factors).unwrap()
}

/// Calls `f` on every joint assignment.
pub fn for_each_assignment(cards: &[usize], mut f: impl FnMut(&[usize])) {
    let mut x = vec![0; cards.len()];
    loop {
        f(&x);
        let mut k = cards.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            x[k] += 1;
            if x[k] < cards[k] {
                break;
            }
            x[k] = 0;
        }
    }
}

pub fn brute_log_z(graph: &FactorGraph) -> f64 {
    let mut terms = Vec::new();
    for_each_assignment(&graph.cardinalities().unwrap(), |x| {
        terms.push(graph.log_unnormalized(x))
    });
    log_sum_exp(&terms)
}

/// Exact single-variable marginals by enumeration.
pub fn brute_marginals(graph: &FactorGraph) -> Vec<Vec<f64>> {
    let cards = graph.cardinalities().unwrap();
    let log_z = brute_log_z(graph);
    let mut m: Vec<Vec<f64>> = cards.iter().map(|&c| vec![0.0; c]).collect();
    for_each_assignment(&cards, |x| {
        let p = (graph.log_unnormalized(x) - log_z).exp();
        for (v, &xv) in x.iter().enumerate() {
            m[v][xv] += p;
        }
    });
    m
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
