//! Factor graphs from JSON, variable orderings, and LBP marginals.

use twisted_smc::graph::{reorder, GraphDocument, OrderStrategy};
use twisted_smc::lbp::{beliefs, run_lbp, LbpConfig};
use twisted_smc::oracle::enumerate_log_z;

const GRAPH: &str = r#"{
  "T": 4,
  "domains": [2, 2, 2, 3],
  "factors": [
    {"scope": [1, 2], "kind": "ising-pair", "params": {"coupling": 0.5}},
    {"scope": [2, 3], "kind": "ising-pair", "params": {"coupling": -0.3}},
    {"scope": [3, 1], "kind": "ising-pair", "params": {"coupling": 0.2}},
    {"scope": [3, 4], "kind": "table", "params": {"values": [1, 2, 3, 3, 2, 1]}},
    {"scope": [1], "kind": "ising-unary", "params": {"field": 0.4}}
  ]
}"#;

fn main() {
    let doc: GraphDocument = serde_json::from_str(GRAPH).unwrap();
    let graph = doc.to_graph().unwrap();
    for strategy in [OrderStrategy::Identity, OrderStrategy::ReverseCuthillMcKee, OrderStrategy::MinimumDegree, OrderStrategy::Random(7)] {
        println!("{:<28} {:?}", strategy.to_string(), reorder(&graph, strategy).as_slice());
    }
    let exact = enumerate_log_z(&graph, true).unwrap();
    let msgs = run_lbp(&graph, &LbpConfig::default()).unwrap();
    let b = beliefs(&msgs);
    for (v, (approx, truth)) in b.iter().zip(exact.marginals.unwrap()).enumerate() {
        println!("variable {}: LBP {:?}  exact {:?}", v + 1, rounded(approx), rounded(&truth));
    }
}

fn rounded(p: &[f64]) -> Vec<f64> {
    p.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}
