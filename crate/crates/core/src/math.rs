//! Log-space arithmetic shared by every sampler and approximation.

pub use statrs::function::gamma::ln_gamma;

/// `log(sum(exp(xs)))` with max-subtraction. Returns `-inf` for an empty
/// slice or when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `log(exp(a) + exp(b))`.
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `log(mean(exp(xs)))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// Normalizes log weights in place into probabilities and returns their
/// log-sum-exp.
pub fn normalize_log_weights(log_w: &[f64], out: &mut Vec<f64>) -> f64 {
    let lse = log_sum_exp(log_w);
    out.clear();
    out.extend(log_w.iter().map(|&lw| (lw - lse).exp()));
    lse
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse logit.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log of the multivariate Beta function `prod Gamma(a_k) / Gamma(sum a_k)`,
/// the normalizer of a Dirichlet density.
pub fn log_dirichlet_normalizer(a: &[f64]) -> f64 {
    let total: f64 = a.iter().sum();
    a.iter().map(|&ak| ln_gamma(ak)).sum::<f64>() - ln_gamma(total)
}

pub fn log_binomial_coefficient(n: u32, k: u32) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Index of the first cumulative sum exceeding `u * total`, scanning left
/// to right. Never returns an index whose probability is zero.
pub(crate) fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}
