//! End-to-end acceptance checks. Each test writes one `criterion N: PASS|FAIL`
//! line straight to stderr (so it shows even when output is captured) and
//! then asserts.

mod common;

use common::{brute_log_z, for_each_assignment, mean_and_se, random_chain, random_tree};
use nalgebra::{DMatrix, DVector};
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};
use twisted_smc::experiment::{run_experiment, summarize_rows, RunConfig};
use twisted_smc::gmrf::{
    build_car, laplace_fit, lattice_adjacency, log_posterior_gradient, simulate_data, twisted_gmrf_model, CarConfig,
    GaussianMrf, LaplaceOptions, LaplaceTwisting, ObsData, ObsModel, TauConvention,
};
use twisted_smc::graph::{OrderStrategy, VariableOrder};
use twisted_smc::lbp::{run_lbp, twisting_from_messages, LbpConfig};
use twisted_smc::lda::exact_loglik_enumerate;
use twisted_smc::models::{car_bundle, lda_bundle, lda_toy, CarSpec, CarTwist, ExperimentBundle, LdaTwist};
use twisted_smc::rng::rng_from_seed;
use twisted_smc::smc::{run_smc, ResamplingScheme, SmcConfig};
use twisted_smc::twist::{
    optimal_twisting_enumerate, FullyAdapted, Regularized, SequentialGraph, TwistedModel, TwistingSet,
};

fn report(criterion: u32, pass: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let line = format!(
        "criterion {criterion}: {status} ({:.2}s of {:.0}s) {detail}\n",
        elapsed.as_secs_f64(),
        limit.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

/// Reports and asserts: the statistical check and the runtime budget.
fn finish(criterion: u32, ok: bool, start: Instant, limit_secs: u64, detail: String) {
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(limit_secs);
    let in_time = elapsed <= limit;
    report(criterion, ok && in_time, elapsed, limit, &detail);
    assert!(ok, "criterion {criterion}: {detail}");
    assert!(in_time, "criterion {criterion} took {elapsed:?}, budget {limit:?}");
}

fn stdev(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[test]
fn criterion_1_optimal_twisting_is_exact() {
    let start = Instant::now();
    let base = Arc::new(SequentialGraph::new(random_chain(4, 2, 11), VariableOrder::identity(4)).unwrap());
    let log_z = brute_log_z(base.graph());
    let model = TwistedModel::new(base.clone(), optimal_twisting_enumerate(&base).unwrap());
    let proposal = FullyAdapted { lookahead: false };
    let (mut worst_err, mut worst_w) = (0.0f64, 0.0f64);
    for rep in 0..100 {
        let cfg = SmcConfig::new(16, rep).with_weight_history();
        let res = run_smc(&model, &proposal, &cfg).unwrap();
        worst_err = worst_err.max((res.log_z_hat - log_z).abs());
        for t in 0..4 {
            for w in res.particles.weights_at(t).unwrap() {
                worst_w = worst_w.max((w - 1.0 / 16.0).abs());
            }
        }
    }
    let ok = worst_err <= 1e-10 && worst_w <= 1e-12;
    finish(1, ok, start, 1, format!("max |log Z err| {worst_err:.2e}, max |w - 1/N| {worst_w:.2e}"));
}

#[test]
fn criterion_2_lbp_twisting_on_trees_is_optimal() {
    let start = Instant::now();
    let g = random_tree(8, 21);
    let msgs = run_lbp(&g, &LbpConfig::default()).unwrap();
    let model = SequentialGraph::new(g, VariableOrder::identity(8)).unwrap();
    let psi = twisting_from_messages(&msgs, &model);
    let opt = optimal_twisting_enumerate(&model).unwrap();
    let mut worst = 0.0f64;
    for len in 1..=8 {
        for_each_assignment(&vec![2; len], |prefix| {
            let a = psi.log_psi_unnormalized(prefix).exp();
            let b = opt.log_psi(prefix).exp();
            worst = worst.max((a - b).abs() / b);
        });
    }
    finish(2, worst <= 1e-8, start, 1, format!("max relative error {worst:.2e}"));
}

#[test]
fn criterion_3_twisted_estimator_is_unbiased() {
    let start = Instant::now();
    let base = Arc::new(SequentialGraph::new(random_chain(5, 2, 31), VariableOrder::identity(5)).unwrap());
    let z = brute_log_z(base.graph()).exp();
    // Messages of a different chain with the same structure: a valid but
    // deliberately inexact twisting.
    let other = random_chain(5, 2, 32);
    let psi = twisting_from_messages(&run_lbp(&other, &LbpConfig::default()).unwrap(), &base);
    let model = TwistedModel::new(base, psi);
    let mut ok = true;
    let mut detail = Vec::new();
    for scheme in [ResamplingScheme::Multinomial, ResamplingScheme::Stratified, ResamplingScheme::Systematic] {
        for rho in [0.0, 0.5] {
            let ratios: Vec<f64> = (0..10_000)
                .map(|r| {
                    let cfg = SmcConfig::new(8, 50_000 + r).with_scheme(scheme).with_threshold(rho);
                    run_smc(&model, &FullyAdapted::default(), &cfg).unwrap().log_z_hat.exp() / z
                })
                .collect();
            let (m, se) = mean_and_se(&ratios);
            let cell_ok = (m - 1.0).abs() <= 3.0 * se;
            ok &= cell_ok && se > 0.0;
            detail.push(format!("{scheme}/{rho}: {:+.4} ({:.1} se)", m - 1.0, (m - 1.0).abs() / se));
        }
    }
    finish(3, ok, start, 120, detail.join(", "));
}

const ISING_CONFIG: &str = r#"
experiment = "ising"
methods = ["smc-base", "smc-twist"]
N = [16, 64, 256, 512]
replications = 50
seed = 2024
output = "ising8"

[ising]
width = 8
height = 8
periodic = true
coupling = 0.44
field_seed = 1
"#;

#[test]
fn criterion_4_ising_twisting_beats_larger_baseline() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml(ISING_CONFIG, "ising").unwrap();
    let out = run_experiment(&cfg, Some(dir.path()), 4).unwrap();
    let oracle = out.meta.oracle.as_ref().expect("transfer oracle applies to 8x8").log_z;
    let summary = summarize_rows(&out.rows, true).unwrap();
    let find = |method: &str, n: usize| summary.iter().find(|s| s.method == method && s.n == n).unwrap();
    // standard error of the RMSE by the delta method
    let rmse_se = |method: &str, n: usize| {
        let sq: Vec<f64> = out
            .rows
            .iter()
            .filter(|r| r.method == method && r.n == n)
            .map(|r| (r.log_z_hat - oracle).powi(2))
            .collect();
        let (mse, se) = mean_and_se(&sq);
        (mse.sqrt(), se / (2.0 * mse.sqrt()))
    };
    let base512 = find("smc-base", 512).rmse.unwrap();
    let twist64 = find("smc-twist", 64).rmse.unwrap();
    let twist: Vec<(f64, f64)> = [16, 64, 256].iter().map(|&n| rmse_se("smc-twist", n)).collect();
    let mut inversions = 0;
    let mut monotone = true;
    for w in twist.windows(2) {
        if w[1].0 > w[0].0 {
            inversions += 1;
            monotone &= w[1].0 - w[0].0 <= (w[0].1.powi(2) + w[1].1.powi(2)).sqrt();
        }
    }
    monotone &= inversions <= 1;
    let ok = twist64 <= base512 && monotone;
    finish(
        4,
        ok,
        start,
        300,
        format!(
            "RMSE twist(64) {twist64:.4} vs base(512) {base512:.4}; twist RMSE over N=16,64,256: {:.4}, {:.4}, {:.4}",
            twist[0].0, twist[1].0, twist[2].0
        ),
    );
}

fn replicate(bundle: &ExperimentBundle, n: usize, reps: u64, seed0: u64) -> Vec<f64> {
    (0..reps).map(|r| bundle.run(&SmcConfig::new(n, seed0 + r), false).unwrap().log_z_hat).collect()
}

#[test]
fn criterion_5_car_twisting_reduces_spread_and_order_sensitivity() {
    let start = Instant::now();
    let mut spec = CarSpec::lattice(8, 8);
    assert_eq!((spec.tau, spec.d, spec.trials), (0.1, 1.0, 10));
    let data = spec.simulate(1).unwrap();
    let twist = car_bundle(&spec, &data, CarTwist::Laplace, 0.0).unwrap();
    let base = car_bundle(&spec, &data, CarTwist::None, 0.0).unwrap();
    let reference = twist.run(&SmcConfig::new(100_000, 99), false).unwrap().log_z_hat;
    let sd_twist = stdev(&replicate(&twist, 64, 50, 1000));
    let sd_base = stdev(&replicate(&base, 1024, 50, 2000));
    let (mut t_sd, mut b_sd) = (Vec::new(), Vec::new());
    for k in 0..20 {
        spec.order = OrderStrategy::Random(300 + k);
        let twist = car_bundle(&spec, &data, CarTwist::Laplace, 0.0).unwrap();
        let base = car_bundle(&spec, &data, CarTwist::None, 0.0).unwrap();
        t_sd.push(stdev(&replicate(&twist, 64, 50, 3000 + 100 * k)));
        b_sd.push(stdev(&replicate(&base, 1024, 50, 5000 + 100 * k)));
    }
    let spread = |v: &[f64]| v.iter().copied().fold(0.0, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min);
    let (t_ratio, b_ratio) = (spread(&t_sd), spread(&b_sd));
    let ok = sd_twist <= 0.25 * sd_base && t_ratio < b_ratio;
    finish(
        5,
        ok,
        start,
        600,
        format!(
            "reference log Z {reference:.4}; stdev twist(64) {sd_twist:.4} vs base(1024) {sd_base:.4}; \
             order max/min stdev twist {t_ratio:.3} vs base {b_ratio:.3}"
        ),
    );
}

#[test]
fn criterion_6_lda_ep_twisting_reduces_mse() {
    let start = Instant::now();
    let (model, doc) = lda_toy(10);
    assert_eq!((model.num_topics(), model.vocab_size(), doc.len()), (4, 10, 10));
    let exact = exact_loglik_enumerate(&model, &doc).unwrap();
    let twist = lda_bundle(&model, &doc, LdaTwist::Ep).unwrap();
    let base = lda_bundle(&model, &doc, LdaTwist::None).unwrap();
    let mse = |xs: &[f64]| xs.iter().map(|x| (x - exact).powi(2)).sum::<f64>() / xs.len() as f64;
    let mut ok = true;
    let mut detail = Vec::new();
    for n in [50, 100] {
        let t = replicate(&twist, n, 100, 10_000);
        let b = replicate(&base, n, 100, 20_000);
        let (m, se) = mean_and_se(&t);
        let (mt, mb) = (mse(&t), mse(&b));
        ok &= mt <= mb / 3.0 && (m - exact).abs() <= 3.0 * se;
        detail.push(format!("N={n}: MSE twist {mt:.2e} base {mb:.2e}, bias {:.1} se", (m - exact).abs() / se));
    }
    finish(6, ok, start, 120, detail.join("; "));
}

/// `log N(y; mu, Q^{-1} + sigma^2 I)` with dense linear algebra.
fn dense_gaussian_marginal(gmrf: &GaussianMrf, sigma: f64, y: &[f64]) -> f64 {
    let n = gmrf.dim();
    let q = DMatrix::from_row_slice(n, n, &gmrf.precision().to_dense());
    let cov = q.try_inverse().unwrap() + DMatrix::identity(n, n) * sigma * sigma;
    let d = DVector::from_column_slice(y) - DVector::from_column_slice(gmrf.mean());
    let chol = cov.cholesky().unwrap();
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + d.dot(&chol.solve(&d)))
}

fn car16(tau: f64) -> GaussianMrf {
    build_car(&CarConfig {
        adjacency: lattice_adjacency(4, 4),
        tau,
        d: 1.0,
        convention: TauConvention::CovarianceScale,
    })
    .unwrap()
}

#[test]
fn criterion_7_laplace_twisting_is_exact_for_gaussian_observations() {
    let start = Instant::now();
    let gmrf = car16(0.5);
    let sigma = 0.7;
    let obs = ObsModel::Gaussian { sigma };
    let (_, data) = simulate_data(&gmrf, &obs, &[0; 16], &mut rng_from_seed(17));
    let exact = dense_gaussian_marginal(&gmrf, sigma, &data.y);
    let la = laplace_fit(&gmrf, &obs, &data, LaplaceOptions::default()).unwrap();
    let (model, proposal) = twisted_gmrf_model(&gmrf, &obs, &data, &la, &VariableOrder::identity(16)).unwrap();
    let (mut worst_z, mut worst_w) = (0.0f64, 0.0f64);
    for seed in 0..10 {
        for n in [1, 16, 256] {
            let res = run_smc(&model, &proposal, &SmcConfig::new(n, seed).with_weight_history()).unwrap();
            worst_z = worst_z.max((res.log_z_hat - exact).abs());
            for t in 0..16 {
                let w = res.particles.log_omega_at(t).unwrap();
                let spread = w.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    - w.iter().copied().fold(f64::INFINITY, f64::min);
                worst_w = worst_w.max(spread);
            }
        }
    }
    // mode gradient, and the analytic gradient against central differences
    let binom = ObsModel::BinomialLogit;
    let bdata = simulate_data(&gmrf, &binom, &[10; 16], &mut rng_from_seed(18)).1;
    let bla = laplace_fit(&gmrf, &binom, &bdata, LaplaceOptions::default()).unwrap();
    let grad_mode = log_posterior_gradient(&gmrf, &binom, &bdata, &bla.mode);
    let grad_inf = grad_mode.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let logpost = |x: &[f64]| {
        gmrf.log_density(x) + (0..16).map(|t| binom.log_density(bdata.y[t], bdata.trials[t], x[t])).sum::<f64>()
    };
    let x: Vec<f64> = bla.mode.iter().enumerate().map(|(i, m)| m + 0.1 * (i as f64 - 7.5) / 8.0).collect();
    let g = log_posterior_gradient(&gmrf, &binom, &bdata, &x);
    let mut fd_err = 0.0f64;
    for t in 0..16 {
        let h = 1e-5;
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[t] += h;
        xm[t] -= h;
        let fd = (logpost(&xp) - logpost(&xm)) / (2.0 * h);
        fd_err = fd_err.max((fd - g[t]).abs() / g[t].abs().max(1.0));
    }
    let ok = worst_z <= 1e-8 && worst_w <= 1e-8 && grad_inf <= 1e-6 && g.len() == 16 && fd_err <= 1e-5;
    finish(
        7,
        ok,
        start,
        10,
        format!(
            "max |log Z err| {worst_z:.2e}, max weight spread {worst_w:.2e}, mode gradient {grad_inf:.2e}, \
             finite-difference mismatch {fd_err:.2e}"
        ),
    );
}

#[test]
fn criterion_8_regularized_weights_are_bounded() {
    let start = Instant::now();
    let gmrf = car16(10.0);
    let obs = ObsModel::BinomialLogit;
    let data: ObsData = simulate_data(&gmrf, &obs, &[10; 16], &mut rng_from_seed(1)).1;
    let la = laplace_fit(&gmrf, &obs, &data, LaplaceOptions::default()).unwrap();
    let order = VariableOrder::identity(16);
    let (approx, safeguard) = LaplaceTwisting::new(&gmrf, &obs, &data, &la, &order).unwrap();
    let reg = Regularized::new(approx.clone(), safeguard.clone(), 0.01).unwrap();
    let unreg = Regularized::new(approx, safeguard, 0.0).unwrap();
    let bound: Vec<f64> = (0..16).map(|t| reg.log_weight_bound(t)).collect();
    // per-weight rounding allowance on the log scale
    let slack = 1e-10;
    let (mut reg_excess, mut unreg_excess, mut count) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0usize);
    for rep in 0..10 {
        let cfg = SmcConfig::new(6250, 7_000 + rep).with_weight_history();
        let r = run_smc(&reg, &reg, &cfg).unwrap();
        let u = run_smc(&unreg, &unreg, &SmcConfig::new(6250, 8_000 + rep).with_weight_history()).unwrap();
        for (t, b) in bound.iter().enumerate() {
            for &w in r.particles.log_omega_at(t).unwrap() {
                reg_excess = reg_excess.max(w - b);
                count += 1;
            }
            for &w in u.particles.log_omega_at(t).unwrap() {
                unreg_excess = unreg_excess.max(w - b);
            }
        }
    }
    let ok = count >= 1_000_000 && reg_excess <= slack && unreg_excess > 10f64.ln();
    finish(
        8,
        ok,
        start,
        60,
        format!(
            "{count} weights; max log(w / bound) with eps=0.01: {reg_excess:.3e}; with eps=0: {unreg_excess:.3} (needs > {:.3})",
            10f64.ln()
        ),
    );
}
