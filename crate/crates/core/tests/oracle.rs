mod common;

use common::{ising, mean_and_se};
use rand::Rng;
use twisted_smc::graph::{Domain, Factor, FactorGraph, FactorKind};
use twisted_smc::oracle::{
    annealed_smc_log_z, enumerate_log_z, ising_log_z_dp, AnnealConfig, OracleError, OracleMethod,
};
use twisted_smc::rng::rng_from_seed;

fn fields(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn log_2cosh(h: f64) -> f64 {
    (2.0 * h.cosh()).ln()
}

#[test]
fn enumerate_single_unary() {
    let g = FactorGraph::new(
        vec![Domain::Discrete(2)],
        vec![Factor::new(vec![0], FactorKind::table(&[2.0, 6.0]))],
    )
    .unwrap();
    let r = enumerate_log_z(&g, true).unwrap();
    assert!((r.log_z - 8f64.ln()).abs() < 1e-14);
    assert_eq!(r.method, OracleMethod::Enumeration);
    let m = r.marginals.unwrap();
    assert!((m[0][1] - 0.75).abs() < 1e-14);
}

#[test]
fn enumerate_unit_chain() {
    let g = FactorGraph::new(
        vec![Domain::Discrete(2); 2],
        vec![Factor::new(vec![0, 1], FactorKind::table(&[1.0; 4]))],
    )
    .unwrap();
    assert!((enumerate_log_z(&g, false).unwrap().log_z - 4f64.ln()).abs() < 1e-14);
}

#[test]
fn enumerate_refuses_huge_spaces() {
    let g = common::random_chain(25, 2, 1);
    assert!(matches!(
        enumerate_log_z(&g, false),
        Err(OracleError::TooLargeForEnumeration { .. })
    ));
}

#[test]
fn dp_single_site() {
    for h in [-0.7, 0.0, 1.3] {
        let r = ising_log_z_dp(1, 1, 0.44, &[h], true).unwrap();
        assert!((r.log_z - log_2cosh(h)).abs() < 1e-14);
        assert_eq!(r.method, OracleMethod::TransferMatrix);
    }
}

#[test]
fn dp_zero_coupling_is_independent() {
    let (w, h) = (5, 7);
    let hs = fields(w * h, 3);
    let expected: f64 = hs.iter().map(|&x| log_2cosh(x)).sum();
    for periodic in [false, true] {
        let r = ising_log_z_dp(w, h, 0.0, &hs, periodic).unwrap();
        assert!((r.log_z - expected).abs() < 1e-10);
    }
}

#[test]
fn dp_matches_enumeration_on_periodic_4x4() {
    let hs = fields(16, 1);
    let dp = ising_log_z_dp(4, 4, 0.44, &hs, true).unwrap().log_z;
    let en = enumerate_log_z(&ising(4, 4, 0.44, &hs, true), false).unwrap().log_z;
    assert!((dp - en).abs() <= 1e-10 * en.abs().max(1.0), "{dp} vs {en}");
}

#[test]
fn dp_matches_enumeration_on_3x3_without_field() {
    let hs = vec![0.0; 9];
    let dp = ising_log_z_dp(3, 3, 0.44, &hs, true).unwrap().log_z;
    let en = enumerate_log_z(&ising(3, 3, 0.44, &hs, true), false).unwrap().log_z;
    assert!((dp - en).abs() <= 1e-10);
}

#[test]
fn dp_matches_enumeration_on_rectangles() {
    for (w, h) in [(2, 5), (5, 2), (3, 4), (4, 3), (1, 6), (6, 1)] {
        let hs = fields(w * h, (w * 10 + h) as u64);
        for periodic in [false, true] {
            let dp = ising_log_z_dp(w, h, -0.3, &hs, periodic).unwrap().log_z;
            let en = enumerate_log_z(&ising(w, h, -0.3, &hs, periodic), false).unwrap().log_z;
            assert!((dp - en).abs() <= 1e-10, "{w}x{h} periodic={periodic}: {dp} vs {en}");
        }
    }
}

#[test]
fn dp_is_transpose_invariant() {
    let (w, h) = (3, 6);
    let hs = fields(w * h, 9);
    let mut ht = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            ht[c * h + r] = hs[r * w + c];
        }
    }
    for periodic in [false, true] {
        let a = ising_log_z_dp(w, h, 0.44, &hs, periodic).unwrap().log_z;
        let b = ising_log_z_dp(h, w, 0.44, &ht, periodic).unwrap().log_z;
        assert!((a - b).abs() <= 1e-10);
    }
}

#[test]
fn dp_rejects_wide_lattices() {
    let hs = vec![0.0; 21 * 21];
    assert!(matches!(
        ising_log_z_dp(21, 21, 0.44, &hs, true),
        Err(OracleError::WidthTooLarge { .. })
    ));
}

#[test]
fn two_rung_ladder_is_uniform_importance_sampling() {
    let hs = fields(4, 5);
    let g = ising(2, 2, 0.44, &hs, false);
    let cfg = AnnealConfig { ladder: vec![0.0, 1.0], particles: 200, sweeps: 0, seed: 11 };
    let got = annealed_smc_log_z(&g, &cfg).unwrap().log_z;

    // Replay the uniform draws with the same generator.
    let mut rng = rng_from_seed(11);
    let draws: Vec<f64> = (0..200)
        .map(|_| {
            let x: Vec<usize> = (0..4).map(|_| rng.random_range(0..2)).collect();
            g.log_unnormalized(&x)
        })
        .collect();
    let mean = draws.iter().map(|l| l.exp()).sum::<f64>() / 200.0;
    let expected = 16f64.ln() + mean.ln();
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
}

#[test]
fn annealed_estimate_agrees_with_enumeration() {
    let hs = fields(9, 2);
    let g = ising(3, 3, 0.44, &hs, true);
    let exact = enumerate_log_z(&g, false).unwrap().log_z;
    let ratios: Vec<f64> = (0..20)
        .map(|rep| {
            let cfg = AnnealConfig::linear(50, 1000, 2, 100 + rep);
            (annealed_smc_log_z(&g, &cfg).unwrap().log_z - exact).exp()
        })
        .collect();
    let (mean, se) = mean_and_se(&ratios);
    assert!((mean - 1.0).abs() <= 3.0 * se.max(1e-3), "mean ratio {mean}, se {se}");
}

#[test]
fn annealing_is_deterministic_and_validated() {
    let g = ising(2, 3, 0.44, &fields(6, 4), false);
    let cfg = AnnealConfig::linear(5, 50, 1, 8);
    assert_eq!(
        annealed_smc_log_z(&g, &cfg).unwrap().log_z,
        annealed_smc_log_z(&g, &cfg).unwrap().log_z
    );
    let bad = AnnealConfig { ladder: vec![0.0, 0.5, 0.5, 1.0], ..cfg.clone() };
    assert!(matches!(annealed_smc_log_z(&g, &bad), Err(OracleError::InvalidConfig(_))));
    let bad = AnnealConfig { ladder: vec![0.1, 1.0], ..cfg };
    assert!(annealed_smc_log_z(&g, &bad).is_err());
}
