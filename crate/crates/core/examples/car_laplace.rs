//! Binomial observations of a CAR field on a lattice: bootstrap SMC, SMC
//! twisted by a Laplace approximation, twisted SIS, and the regularized
//! twisting with its weight bound.

use twisted_smc::graph::OrderStrategy;
use twisted_smc::models::{car_bundle, CarSpec, CarTwist};
use twisted_smc::smc::SmcConfig;

fn spread(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, v.sqrt())
}

fn main() {
    let spec = CarSpec { order: OrderStrategy::MinimumDegree, ..CarSpec::lattice(8, 8) };
    let data = spec.simulate(1).unwrap();
    let base = car_bundle(&spec, &data, CarTwist::None, 0.0).unwrap();
    let twist = car_bundle(&spec, &data, CarTwist::Laplace, 0.0).unwrap();
    let regularized = car_bundle(&spec, &data, CarTwist::Laplace, 0.01).unwrap();
    println!("Laplace log-likelihood {:.4}", twist.deterministic_estimate.unwrap());

    let runs = |b: &twisted_smc::models::ExperimentBundle, n: usize, sis: bool| -> Vec<f64> {
        (0..20).map(|r| b.run(&SmcConfig::new(n, r), sis).unwrap().log_z_hat).collect()
    };
    for (name, xs) in [
        ("bootstrap SMC, N=1024", runs(&base, 1024, false)),
        ("twisted SMC,   N=64", runs(&twist, 64, false)),
        ("twisted SIS,   N=64", runs(&twist, 64, true)),
        ("regularized,   N=64", runs(&regularized, 64, false)),
    ] {
        let (m, s) = spread(&xs);
        println!("{name}: mean {m:.4}  stdev {s:.4}");
    }
}
