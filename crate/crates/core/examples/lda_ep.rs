//! Document likelihood under LDA: Rao-Blackwellized SMC over topic
//! assignments, with and without twisting from expectation propagation.

use twisted_smc::lda::exact_loglik_enumerate;
use twisted_smc::models::{lda_bundle, lda_toy, LdaTwist};
use twisted_smc::smc::SmcConfig;

fn main() {
    let (model, doc) = lda_toy(10);
    println!("document: {}", doc.to_text());
    let exact = exact_loglik_enumerate(&model, &doc).unwrap();
    let base = lda_bundle(&model, &doc, LdaTwist::None).unwrap();
    let twist = lda_bundle(&model, &doc, LdaTwist::Ep).unwrap();
    println!("exact {exact:.6}   EP {:.6}", twist.deterministic_estimate.unwrap());
    for n in [10, 50, 100] {
        let mse = |b: &twisted_smc::models::ExperimentBundle| {
            (0..100)
                .map(|r| (b.run(&SmcConfig::new(n, r), false).unwrap().log_z_hat - exact).powi(2))
                .sum::<f64>()
                / 100.0
        };
        println!("N={n:>4}: MSE untwisted {:.3e}  EP-twisted {:.3e}", mse(&base), mse(&twist));
    }
}
