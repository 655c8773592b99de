mod common;

use common::{brute_log_z, for_each_assignment, ising, random_chain};
use std::sync::Arc;
use twisted_smc::graph::{OrderStrategy, VariableOrder};
use twisted_smc::math::log_sum_exp;
use twisted_smc::rng::rng_from_seed;
use twisted_smc::smc::{run_smc, ResamplingScheme, SmcConfig, UniformProposal};
use twisted_smc::twist::{
    make_twisted_model, optimal_twisting_enumerate, FullyAdapted, ScaledTwist, SequentialGraph,
    TwistError, TwistedModel, TwistingSet, UnitTwist,
};
use rand::Rng;

fn chain(len: usize, seed: u64) -> Arc<SequentialGraph> {
    Arc::new(SequentialGraph::new(random_chain(len, 2, seed), VariableOrder::identity(len)).unwrap())
}

#[test]
fn last_step_twist_is_single_sum() {
    let base = chain(4, 1);
    let psi = optimal_twisting_enumerate(&base).unwrap();
    // factors entering at the final step: unary on x_3 and pair (x_2, x_3)
    for_each_assignment(&[2, 2, 2], |prefix| {
        let direct: Vec<f64> = (0..2).map(|x| base.log_step_factors(prefix, x)).collect();
        assert!((psi.log_psi(prefix) - log_sum_exp(&direct)).abs() < 1e-12);
    });
}

#[test]
fn two_by_two_ising_twist() {
    let j = 0.44;
    let g = ising(2, 2, j, &[0.0; 4], false);
    let base = SequentialGraph::new(g, VariableOrder::identity(4)).unwrap();
    let psi = optimal_twisting_enumerate(&base).unwrap();
    let s = |c: usize| if c == 0 { -1.0 } else { 1.0 };
    for x1 in 0..2 {
        for x2 in 0..2 {
            let mut total = 0.0;
            for x3 in 0..2 {
                for x4 in 0..2 {
                    total += (j * (s(x1) * s(x3) + s(x2) * s(x4) + s(x3) * s(x4))).exp();
                }
            }
            assert!((psi.log_psi(&[x1, x2]) - total.ln()).abs() < 1e-12);
        }
    }
    assert!((psi.log_z() - brute_log_z(base.graph())).abs() < 1e-12);
}

#[test]
fn enumeration_guard() {
    let g = random_chain(25, 2, 3);
    let base = SequentialGraph::new(g, VariableOrder::identity(25)).unwrap();
    assert!(matches!(
        optimal_twisting_enumerate(&base),
        Err(TwistError::TooLargeForEnumeration { .. })
    ));
}

#[test]
fn unit_twist_is_base_model() {
    let base = chain(5, 4);
    let twisted = TwistedModel::new(base.clone(), UnitTwist { steps: 5 });
    let mut rng = rng_from_seed(1);
    for _ in 0..20 {
        let path: Vec<usize> = (0..5).map(|_| rng.random_range(0..2)).collect();
        for t in 0..5 {
            use twisted_smc::smc::SequentialModel;
            assert_eq!(
                twisted.log_increment(&path[..t], path[t]),
                base.log_increment(&path[..t], path[t])
            );
        }
    }
}

#[test]
fn optimal_twist_targets_are_marginals() {
    let base = chain(3, 7);
    let log_z = brute_log_z(base.graph());
    let psi = optimal_twisting_enumerate(&base).unwrap();
    let model = TwistedModel::new(base.clone(), psi);
    for t in 1..=3 {
        for_each_assignment(&vec![2; t], |prefix| {
            let mut marg = Vec::new();
            for_each_assignment(&vec![2; 3 - t], |rest| {
                let full: Vec<usize> = prefix.iter().chain(rest).copied().collect();
                marg.push(base.graph().log_unnormalized(&base.to_assignment(&full)));
            });
            let expected = log_sum_exp(&marg) - log_z;
            assert!((model.log_target(prefix) - log_z - expected).abs() < 1e-12);
        });
    }
}

#[test]
fn final_target_untouched_by_twisting() {
    let g = random_chain(6, 3, 9);
    let order = OrderStrategy::Random(4).apply(&g.variable_adjacency());
    let base = Arc::new(SequentialGraph::new(g, order).unwrap());
    let psi = optimal_twisting_enumerate(&base).unwrap();
    let model = TwistedModel::new(base.clone(), psi);
    let mut rng = rng_from_seed(2);
    for _ in 0..100 {
        let path: Vec<usize> = (0..6).map(|_| rng.random_range(0..3)).collect();
        let exact = base.graph().log_unnormalized(&base.to_assignment(&path));
        let twisted = model.log_target(&path);
        assert!((twisted - exact).abs() <= 2.0 * f64::EPSILON * exact.abs().max(1.0));
    }
}

#[test]
fn fully_adapted_normalizes_ratios() {
    use twisted_smc::graph::{Domain, Factor, FactorGraph, FactorKind};
    use twisted_smc::smc::Proposal;
    let g = FactorGraph::new(
        vec![Domain::Discrete(2)],
        vec![Factor::new(vec![0], FactorKind::table(&[2.0, 6.0]))],
    )
    .unwrap();
    let base = SequentialGraph::new(g, VariableOrder::identity(1)).unwrap();
    let q = FullyAdapted::default();
    assert!((q.log_density(&base, &[], 0).exp() - 0.25).abs() < 1e-15);
    assert!((q.log_density(&base, &[], 1).exp() - 0.75).abs() < 1e-15);
}

#[test]
fn optimal_twisting_with_full_adaptation_is_exact() {
    for seed in 0..5 {
        let base = chain(6, 100 + seed);
        let psi = optimal_twisting_enumerate(&base).unwrap();
        let log_z = brute_log_z(base.graph());
        let model = TwistedModel::new(base.clone(), psi);
        for scheme in [ResamplingScheme::Multinomial, ResamplingScheme::Systematic] {
            let cfg = SmcConfig::new(16, seed).with_threshold(1.0).with_scheme(scheme).with_weight_history();
            let res = run_smc(&model, &FullyAdapted::default(), &cfg).unwrap();
            assert!(((res.log_z_hat - log_z) / log_z).abs() <= 1e-10);
            for t in 0..6 {
                for w in res.particles.weights_at(t).unwrap() {
                    assert!((w * 16.0 - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn optimal_twisting_samples_the_posterior() {
    let base = chain(3, 55);
    let log_z = brute_log_z(base.graph());
    let model = TwistedModel::new(base.clone(), optimal_twisting_enumerate(&base).unwrap());
    let n = 10_000;
    let res = run_smc(&model, &FullyAdapted::default(), &SmcConfig::new(n, 4).with_threshold(1.0)).unwrap();
    let mut counts = [0usize; 8];
    for i in 0..n {
        let p = res.trajectory(i).unwrap();
        counts[p[0] * 4 + p[1] * 2 + p[2]] += 1;
    }
    let mut chi2 = 0.0;
    for_each_assignment(&[2, 2, 2], |x| {
        let expected = n as f64 * (base.graph().log_unnormalized(x) - log_z).exp();
        let observed = counts[x[0] * 4 + x[1] * 2 + x[2]] as f64;
        chi2 += (observed - expected).powi(2) / expected;
    });
    // 0.999 quantile of chi-square with 7 degrees of freedom
    assert!(chi2 < 24.322, "chi2 = {chi2}");
}

#[test]
fn per_step_constants_do_not_change_the_run() {
    let base = chain(8, 31);
    let psi = Arc::new(optimal_twisting_enumerate(&base).unwrap());
    let plain = TwistedModel::new(base.clone(), psi.clone());
    let mut rng = rng_from_seed(3);
    let varying: Vec<f64> = (0..7).map(|_| rng.random_range(-5.0..5.0)).collect();
    for log_scale in [vec![2.5; 7], varying] {
        let scaled = TwistedModel::new(
            base.clone(),
            ScaledTwist {
                inner: psi.clone(),
                log_scale,
            },
        );
        let cfg = SmcConfig::new(50, 17).with_threshold(0.6).with_weight_history();
        let a = run_smc(&plain, &UniformProposal, &cfg).unwrap();
        let b = run_smc(&scaled, &UniformProposal, &cfg).unwrap();
        assert_eq!(a.resampled, b.resampled);
        assert!((a.log_z_hat - b.log_z_hat).abs() < 1e-10);
        for t in 0..8 {
            for (x, y) in a.particles.weights_at(t).unwrap().iter().zip(b.particles.weights_at(t).unwrap()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        for i in 0..50 {
            assert_eq!(a.trajectory(i).unwrap(), b.trajectory(i).unwrap());
        }
    }
}

#[test]
fn make_twisted_model_checks_order_length() {
    let g = random_chain(3, 2, 1);
    assert!(make_twisted_model(g, VariableOrder::identity(2), UnitTwist { steps: 2 }).is_err());
}
