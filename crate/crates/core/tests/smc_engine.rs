mod common;

use common::{brute_log_z, mean_and_se, random_chain};
use std::sync::Arc;
use twisted_smc::graph::{Domain, Factor, FactorGraph, FactorKind, VariableOrder};
use twisted_smc::math::{log_sum_exp, normalize_log_weights};
use twisted_smc::smc::{
    log_normalizing_constant, run_sis, run_smc, ResamplingScheme, SequentialModel, SmcConfig,
    SmcError, StorageKind, UniformProposal,
};
use twisted_smc::twist::{FullyAdapted, SequentialGraph};

const SCHEMES: [ResamplingScheme; 3] = [
    ResamplingScheme::Multinomial,
    ResamplingScheme::Stratified,
    ResamplingScheme::Systematic,
];

fn chain_model(len: usize, seed: u64) -> SequentialGraph {
    SequentialGraph::new(random_chain(len, 2, seed), VariableOrder::identity(len)).unwrap()
}

fn single_table(values: &[f64]) -> SequentialGraph {
    let g = FactorGraph::new(
        vec![Domain::Discrete(values.len())],
        vec![Factor::new(vec![0], FactorKind::table(values))],
    )
    .unwrap();
    SequentialGraph::new(g, VariableOrder::identity(1)).unwrap()
}

#[test]
fn single_step_table_estimate() {
    let model = single_table(&[2.0, 6.0]);
    let cfg = SmcConfig::new(100_000, 42).with_scheme(ResamplingScheme::Multinomial);
    let res = run_smc(&model, &UniformProposal, &cfg).unwrap();
    let w: Vec<f64> = res.particles.log_weights().iter().map(|l| l.exp()).collect();
    let (mean, se) = mean_and_se(&w);
    let se_log = se / mean;
    assert!((res.log_z_hat - 8f64.ln()).abs() <= 3.0 * se_log, "{}", res.log_z_hat);
}

#[test]
fn fully_adapted_first_step_has_uniform_weights() {
    let model = chain_model(5, 3);
    let cfg = SmcConfig::new(32, 1).with_threshold(1.0).with_weight_history();
    let res = run_smc(&model, &FullyAdapted::default(), &cfg).unwrap();
    let w0 = res.particles.weights_at(0).unwrap();
    for w in w0 {
        assert!((w - 1.0 / 32.0).abs() < 1e-15);
    }
}

#[test]
fn zero_threshold_disables_resampling() {
    let model = chain_model(6, 4);
    let cfg = SmcConfig::new(50, 9).with_threshold(0.0);
    let res = run_smc(&model, &UniformProposal, &cfg).unwrap();
    assert!(res.resampled.iter().all(|r| !r));
    for t in 0..6 {
        let a = res.particles.ancestors(t).unwrap();
        assert!(a.iter().enumerate().all(|(i, &ai)| ai == i));
    }
}

#[test]
fn sis_path_is_bit_identical() {
    let model = chain_model(8, 5);
    for scheme in SCHEMES {
        let cfg = SmcConfig::new(40, 77).with_threshold(0.0).with_scheme(scheme);
        let a = run_smc(&model, &UniformProposal, &cfg).unwrap();
        let b = run_sis(&model, &UniformProposal, &cfg).unwrap();
        assert_eq!(a.log_z_hat.to_bits(), b.log_z_hat.to_bits());
        for (x, y) in a.particles.log_weights().iter().zip(b.particles.log_weights()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.ess_trace, b.ess_trace);
    }
}

#[test]
fn normalizing_constant_from_increments() {
    let c: f64 = 3.5;
    assert!((log_normalizing_constant(&[vec![c.ln(); 7]]) - c.ln()).abs() < 1e-14);
    let steps = vec![vec![1f64.ln(), 3f64.ln()], vec![0.5f64.ln(), 1.5f64.ln()]];
    assert!((log_normalizing_constant(&steps) - (2f64.ln() + 1f64.ln())).abs() < 1e-14);
}

#[test]
fn weight_recursion_reproduces_stored_weights() {
    let model = chain_model(10, 6);
    for scheme in SCHEMES {
        let cfg = SmcConfig::new(64, 3).with_scheme(scheme).with_threshold(0.7).with_weight_history();
        let res = run_smc(&model, &UniformProposal, &cfg).unwrap();
        let ps = &res.particles;
        let log_n = 64f64.ln();
        assert!(res.resample_count() > 0);
        for t in 1..10 {
            let prev = ps.log_weights_at(t - 1).unwrap();
            let mut scratch = Vec::new();
            let lse = normalize_log_weights(prev, &mut scratch);
            let omega = ps.log_omega_at(t).unwrap();
            let a = ps.ancestors(t).unwrap();
            for i in 0..64 {
                let lw_prev = prev[a[i]] - lse;
                let carried = match ps.log_nu_at(t) {
                    Some(nu) => lw_prev - nu[a[i]],
                    None => lw_prev + log_n,
                };
                let expect = omega[i] + carried;
                let stored = ps.log_weights_at(t).unwrap()[i];
                let ulp = f64::EPSILON * stored.abs().max(1.0);
                assert!((expect - stored).abs() <= 4.0 * ulp, "t={t} i={i}");
            }
            let sum: f64 = ps.weights_at(t).unwrap().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}

/// Exact expectation of the estimator over every proposal and multinomial
/// resampling outcome for N = 2.
fn exhaustive_expectation(
    model: &SequentialGraph,
    q: &dyn Fn(&[usize]) -> Vec<f64>,
    adj: &dyn Fn(&[usize]) -> f64,
    rho: f64,
) -> f64 {
    fn recurse(
        model: &SequentialGraph,
        q: &dyn Fn(&[usize]) -> Vec<f64>,
        adj: &dyn Fn(&[usize]) -> f64,
        rho: f64,
        paths: [Vec<usize>; 2],
        log_w: [f64; 2],
        log_zhat: f64,
    ) -> f64 {
        let t = paths[0].len();
        if t == model.num_steps() {
            return log_zhat.exp();
        }
        let mut branches: Vec<(f64, [Vec<usize>; 2], [f64; 2])> = Vec::new();
        if t == 0 {
            branches.push((1.0, paths.clone(), [0.0, 0.0]));
        } else {
            let nu_hat = [log_w[0] + adj(&paths[0]), log_w[1] + adj(&paths[1])];
            let l = log_sum_exp(&nu_hat);
            let nu = [(nu_hat[0] - l).exp(), (nu_hat[1] - l).exp()];
            let ess = 1.0 / (nu[0] * nu[0] + nu[1] * nu[1]);
            if ess < rho * 2.0 {
                for a0 in 0..2 {
                    for a1 in 0..2 {
                        let p = nu[a0] * nu[a1];
                        if p == 0.0 {
                            continue;
                        }
                        let carry = [log_w[a0] - (nu_hat[a0] - l), log_w[a1] - (nu_hat[a1] - l)];
                        branches.push((p, [paths[a0].clone(), paths[a1].clone()], carry));
                    }
                }
            } else {
                let ln2 = 2f64.ln();
                branches.push((1.0, paths.clone(), [log_w[0] + ln2, log_w[1] + ln2]));
            }
        }
        let mut total = 0.0;
        for (p_branch, bpaths, carry) in branches {
            let q0 = q(&bpaths[0]);
            let q1 = q(&bpaths[1]);
            for x0 in 0..2 {
                for x1 in 0..2 {
                    let p = p_branch * q0[x0] * q1[x1];
                    if p == 0.0 {
                        continue;
                    }
                    let lw = [
                        model.log_increment(&bpaths[0], x0) - q0[x0].ln() + carry[0],
                        model.log_increment(&bpaths[1], x1) - q1[x1].ln() + carry[1],
                    ];
                    let lse = log_sum_exp(&lw);
                    let mut np = bpaths.clone();
                    np[0].push(x0);
                    np[1].push(x1);
                    total += p * recurse(
                        model,
                        q,
                        adj,
                        rho,
                        np,
                        [lw[0] - lse, lw[1] - lse],
                        log_zhat + lse - 2f64.ln(),
                    );
                }
            }
        }
        total
    }
    recurse(model, q, adj, rho, [Vec::new(), Vec::new()], [0.0; 2], 0.0)
}

#[test]
fn estimator_is_exactly_unbiased_for_two_particles() {
    let model = chain_model(3, 21);
    let z = brute_log_z(model.graph()).exp();
    let uniform = |_: &[usize]| vec![0.5, 0.5];
    let no_adj = |_: &[usize]| 0.0;
    let adapted = |h: &[usize]| {
        let l: Vec<f64> = (0..2).map(|x| model.log_increment(h, x)).collect();
        let s = log_sum_exp(&l);
        l.iter().map(|v| (v - s).exp()).collect::<Vec<f64>>()
    };
    let lookahead = |h: &[usize]| {
        let l: Vec<f64> = (0..2).map(|x| model.log_increment(h, x)).collect();
        log_sum_exp(&l)
    };
    for rho in [0.0, 0.9, 1.0] {
        let e = exhaustive_expectation(&model, &uniform, &no_adj, rho);
        assert!((e / z - 1.0).abs() < 1e-12, "uniform rho={rho}: {e} vs {z}");
        let e = exhaustive_expectation(&model, &adapted, &lookahead, rho);
        assert!((e / z - 1.0).abs() < 1e-12, "adapted rho={rho}: {e} vs {z}");
    }
}

#[test]
fn empirical_unbiasedness_across_schemes() {
    let model = chain_model(4, 8);
    let z = brute_log_z(model.graph()).exp();
    for scheme in SCHEMES {
        for rho in [0.0, 0.5, 1.0] {
            let ratios: Vec<f64> = (0..3000)
                .map(|r| {
                    let cfg = SmcConfig::new(4, 1000 + r).with_scheme(scheme).with_threshold(rho);
                    (run_smc(&model, &UniformProposal, &cfg).unwrap().log_z_hat).exp() / z
                })
                .collect();
            let (m, se) = mean_and_se(&ratios);
            assert!((m - 1.0).abs() <= 3.5 * se, "{scheme} rho={rho}: {m} ± {se}");
        }
    }
}

#[test]
fn trajectories_without_resampling_are_rows() {
    let model = chain_model(5, 2);
    let cfg = SmcConfig::new(10, 3).with_threshold(0.0);
    let res = run_smc(&model, &UniformProposal, &cfg).unwrap();
    for i in 0..10 {
        let expected: Vec<usize> = (0..5).map(|t| res.particles.positions(t).unwrap()[i]).collect();
        assert_eq!(res.trajectory(i).unwrap(), expected);
    }
    assert!(matches!(res.trajectory(10), Err(SmcError::IndexOutOfRange { .. })));
}

#[test]
fn forced_coalescence() {
    // the first variable must be 0: only such particles survive resampling
    let g = FactorGraph::new(
        vec![Domain::Discrete(2); 3],
        vec![
            Factor::new(vec![0], FactorKind::table(&[1.0, 0.0])),
            Factor::new(vec![0, 1], FactorKind::table(&[1.0, 2.0, 3.0, 4.0])),
            Factor::new(vec![1, 2], FactorKind::table(&[1.0, 2.0, 3.0, 4.0])),
        ],
    )
    .unwrap();
    let model = SequentialGraph::new(g, VariableOrder::identity(3)).unwrap();
    for storage in [StorageKind::Dense, StorageKind::Tree] {
        let cfg = SmcConfig::new(16, 5).with_threshold(1.0).with_storage(storage);
        let res = run_smc(&model, &UniformProposal, &cfg).unwrap();
        assert!(res.resampled[1]);
        for i in 0..16 {
            assert_eq!(res.trajectory(i).unwrap()[0], 0);
        }
    }
}

#[test]
fn reconstruction_matches_eager_copies() {
    let model = chain_model(30, 12);
    for scheme in SCHEMES {
        let cfg = SmcConfig::new(25, 8).with_scheme(scheme).with_threshold(0.8);
        let dense = run_smc(&model, &UniformProposal, &cfg).unwrap();
        let tree = run_smc(&model, &UniformProposal, &cfg.with_storage(StorageKind::Tree)).unwrap();
        assert_eq!(dense.log_z_hat.to_bits(), tree.log_z_hat.to_bits());
        // eager oracle: copy full paths at every step using the ancestor table
        let ps = &dense.particles;
        let mut paths: Vec<Vec<usize>> = vec![Vec::new(); 25];
        for t in 0..30 {
            let a = ps.ancestors(t).unwrap();
            let pos = ps.positions(t).unwrap();
            paths = (0..25)
                .map(|i| {
                    let mut p = paths[a[i]].clone();
                    p.push(pos[i]);
                    p
                })
                .collect();
        }
        for i in 0..25 {
            assert_eq!(dense.trajectory(i).unwrap(), paths[i]);
            assert_eq!(tree.trajectory(i).unwrap(), paths[i]);
        }
        assert!(tree.particles.stored_nodes().unwrap() < 25 * 30);
    }
}

#[test]
fn zero_support_is_reported() {
    let model = single_table(&[0.0, 0.0]);
    let cfg = SmcConfig::new(4, 0);
    assert_eq!(
        run_smc(&model, &UniformProposal, &cfg).unwrap_err(),
        SmcError::AllWeightsZero { step: 0 }
    );
}

#[test]
fn invalid_configs_are_rejected() {
    let model = single_table(&[1.0, 1.0]);
    assert!(run_smc(&model, &UniformProposal, &SmcConfig::new(0, 0)).is_err());
    assert!(run_smc(&model, &UniformProposal, &SmcConfig::new(3, 0).with_threshold(1.5)).is_err());
}

#[test]
fn reproducible_from_seed() {
    let model = Arc::new(chain_model(12, 1));
    let cfg = SmcConfig::new(30, 123);
    let a = run_smc(&*model, &UniformProposal, &cfg).unwrap();
    let b = run_smc(&*model, &UniformProposal, &cfg).unwrap();
    assert_eq!(a.log_z_hat.to_bits(), b.log_z_hat.to_bits());
    let json = serde_json::to_value(a.record()).unwrap();
    assert_eq!(json["seed"], 123);
    assert!(json["log_Z_hat"].is_number());
    assert_eq!(json["resampled_flags"].as_array().unwrap().len(), 12);
}
