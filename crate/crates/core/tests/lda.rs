mod common;

use common::mean_and_se;
use twisted_smc::lda::*;
use twisted_smc::math::log_dirichlet_normalizer;
use twisted_smc::rng::rng_from_seed;
use twisted_smc::smc::{SequentialModel, SmcConfig};

fn toy() -> (LdaModel, Document) {
    let model = LdaModel::random(4, 10, 1.0, 1.0, 1);
    let doc = model.sample_document(10, &mut rng_from_seed(101));
    (model, doc)
}

fn two_topic() -> LdaModel {
    LdaModel::new(vec![1.0, 1.0], vec![vec![0.7, 0.1], vec![0.3, 0.9]]).unwrap()
}

#[test]
fn exact_single_word() {
    let m = LdaModel::new(vec![0.5, 1.5, 2.0], vec![vec![0.2, 0.5, 0.1], vec![0.8, 0.5, 0.9]]).unwrap();
    let doc = Document { words: vec![1] };
    let expected = (0.5 / 4.0 * 0.8 + 1.5 / 4.0 * 0.5 + 2.0 / 4.0 * 0.9f64).ln();
    assert!((exact_loglik_enumerate(&m, &doc).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn exact_single_topic() {
    let m = LdaModel::new(vec![0.3], vec![vec![0.25], vec![0.75]]).unwrap();
    let doc = Document { words: vec![0, 1, 1, 0, 1] };
    let expected = 2.0 * 0.25f64.ln() + 3.0 * 0.75f64.ln();
    assert!((exact_loglik_enumerate(&m, &doc).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn exact_two_by_two_hand_expansion() {
    // alpha = (1,1): P(x1=a, x2=b) = 1/3 if a == b, 1/6 otherwise.
    let m = two_topic();
    let doc = Document { words: vec![0, 1] };
    let p = |w: usize, k: usize| m.phi[w][k];
    let total = (1.0 / 3.0) * p(0, 0) * p(1, 0)
        + (1.0 / 6.0) * p(0, 0) * p(1, 1)
        + (1.0 / 6.0) * p(0, 1) * p(1, 0)
        + (1.0 / 3.0) * p(0, 1) * p(1, 1);
    assert!((exact_loglik_enumerate(&m, &doc).unwrap() - total.ln()).abs() < 1e-12);
}

#[test]
fn single_topic_is_exact_everywhere() {
    let m = LdaModel::new(vec![0.3], vec![vec![0.25], vec![0.75]]).unwrap();
    let doc = Document { words: vec![0, 1, 1, 0, 1] };
    let exact = exact_loglik_enumerate(&m, &doc).unwrap();
    let ep = ep_fit(&m, &doc, EpOptions::default()).unwrap();
    assert!((ep.log_likelihood - exact).abs() < 1e-12);
    for seed in 0..5 {
        let r = rb_smc_loglik(&m, &doc, &ep, &SmcConfig::new(7, seed)).unwrap();
        assert!((r.log_z_hat - exact).abs() < 1e-12);
    }
}

#[test]
fn identical_topics_give_exact_ep() {
    let col = [0.1, 0.2, 0.3, 0.4];
    let m = LdaModel::new(vec![0.5, 2.0, 1.0], col.iter().map(|&c| vec![c; 3]).collect()).unwrap();
    let doc = Document { words: vec![3, 0, 2, 2, 1] };
    let ep = ep_fit(&m, &doc, EpOptions::default()).unwrap();
    assert!(ep.beta.iter().flatten().all(|b| b.abs() < 1e-9));
    for (w, &c) in col.iter().enumerate() {
        if doc.words.contains(&w) {
            assert!((ep.log_s[w] - c.ln()).abs() < 1e-9);
        }
    }
    let exact = exact_loglik_enumerate(&m, &doc).unwrap();
    assert!((ep.log_likelihood - exact).abs() < 1e-9);
}

#[test]
fn toy_ep_is_close_to_exact() {
    let (m, doc) = toy();
    let ep = ep_fit(&m, &doc, EpOptions::default()).unwrap();
    let exact = exact_loglik_enumerate(&m, &doc).unwrap();
    assert!(ep.converged);
    assert!((ep.log_likelihood - exact).abs() <= 0.3, "{} vs {exact}", ep.log_likelihood);
}

#[test]
fn pseudo_counts() {
    let (m, doc) = toy();
    let ep = ep_fit(&m, &doc, EpOptions::default()).unwrap();
    assert_eq!(twisted_pseudo_counts(&ep, &doc, &m.alpha, doc.len()).unwrap(), m.alpha);
    let zero = EpApprox::zero(&m);
    for t in 0..=doc.len() {
        assert_eq!(twisted_pseudo_counts(&zero, &doc, &m.alpha, t).unwrap(), m.alpha);
        let g = twisted_pseudo_counts(&ep, &doc, &m.alpha, t).unwrap();
        assert!(g.iter().all(|&v| v > 0.0));
    }
    // EP estimate from the Dirichlet normalizers of g_0 and alpha
    let g0 = twisted_pseudo_counts(&ep, &doc, &m.alpha, 0).unwrap();
    let direct = log_dirichlet_normalizer(&g0) - log_dirichlet_normalizer(&m.alpha)
        + doc.words.iter().map(|&w| ep.log_s[w]).sum::<f64>();
    assert!((direct - ep.log_likelihood).abs() < 1e-12);
}

#[test]
fn final_twisted_target_is_the_joint() {
    let (m, doc) = toy();
    let ep = ep_fit(&m, &doc, EpOptions::default()).unwrap();
    let model = LdaSequentialModel::new(&m, &doc, &ep).unwrap();
    let mut rng = rng_from_seed(4);
    for _ in 0..20 {
        let x: Vec<usize> = (0..doc.len()).map(|_| rand::Rng::random_range(&mut rng, 0..4)).collect();
        let mut a = m.alpha.clone();
        let mut direct = -log_dirichlet_normalizer(&m.alpha);
        for (t, &k) in x.iter().enumerate() {
            a[k] += 1.0;
            direct += m.phi[doc.words[t]][k].ln();
        }
        direct += log_dirichlet_normalizer(&a);
        assert!((model.log_gamma(&x) - direct).abs() <= 1e-10);
    }
}

#[test]
fn proposal_rows_sum_to_one() {
    let (m, doc) = toy();
    let ep = ep_fit(&m, &doc, EpOptions::default()).unwrap();
    let model = LdaSequentialModel::new(&m, &doc, &ep).unwrap();
    let history = [2, 0, 3, 3];
    for t in 0..=history.len() {
        let p = model.proposal_probabilities(&history[..t]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn empty_document() {
    let (m, _) = toy();
    let doc = Document::default();
    let ep = ep_fit(&m, &doc, EpOptions::default()).unwrap();
    assert_eq!(ep.log_likelihood, 0.0);
    assert_eq!(exact_loglik_enumerate(&m, &doc).unwrap(), 0.0);
    assert_eq!(rb_smc_loglik(&m, &doc, &ep, &SmcConfig::new(10, 1)).unwrap().log_z_hat, 0.0);
}

#[test]
fn twisted_estimator_is_unbiased() {
    let (m, doc) = toy();
    let ep = ep_fit(&m, &doc, EpOptions::default()).unwrap();
    let exact = exact_loglik_enumerate(&m, &doc).unwrap();
    let ratios: Vec<f64> = (0..10_000)
        .map(|s| (rb_smc_loglik(&m, &doc, &ep, &SmcConfig::new(10, s)).unwrap().log_z_hat - exact).exp())
        .collect();
    let (mean, se) = mean_and_se(&ratios);
    assert!((mean - 1.0).abs() <= 3.0 * se, "{mean} ± {se}");
}

#[test]
fn twisting_lowers_mse() {
    let (m, doc) = toy();
    let ep = ep_fit(&m, &doc, EpOptions::default()).unwrap();
    let zero = EpApprox::zero(&m);
    let exact = exact_loglik_enumerate(&m, &doc).unwrap();
    let mse = |e: &EpApprox| {
        (0..100)
            .map(|s| (rb_smc_loglik(&m, &doc, e, &SmcConfig::new(100, s)).unwrap().log_z_hat - exact).powi(2))
            .sum::<f64>()
            / 100.0
    };
    assert!(mse(&ep) <= mse(&zero));
}

#[test]
fn invalid_inputs() {
    assert!(LdaModel::new(vec![1.0, 1.0], vec![vec![0.5, 0.5], vec![0.6, 0.5]]).is_err());
    assert!(LdaModel::new(vec![0.0], vec![vec![1.0]]).is_err());
    let m = two_topic();
    assert!(matches!(
        exact_loglik_enumerate(&m, &Document { words: vec![2] }),
        Err(LdaError::WordOutOfRange { word: 3, vocab: 2 })
    ));
    assert!(matches!(
        exact_loglik_enumerate(&m, &Document { words: vec![0; 25] }),
        Err(LdaError::TooLargeForEnumeration { .. })
    ));
}

#[test]
fn model_file_round_trip() {
    let (m, _) = toy();
    let back = LdaModel::from_toml(&m.to_toml()).unwrap();
    assert_eq!(back, m);
}
