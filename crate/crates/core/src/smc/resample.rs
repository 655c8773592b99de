//! Resampling schemes and the effective sample size.

use crate::rng::SmcRng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ResamplingScheme {
    Multinomial,
    Stratified,
    #[default]
    Systematic,
}

impl FromStr for ResamplingScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "multinomial" => Ok(Self::Multinomial),
            "stratified" => Ok(Self::Stratified),
            "systematic" => Ok(Self::Systematic),
            other => Err(format!("unknown resampling scheme `{other}`")),
        }
    }
}

impl fmt::Display for ResamplingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Multinomial => "multinomial",
            Self::Stratified => "stratified",
            Self::Systematic => "systematic",
        })
    }
}

/// Effective sample size `1 / sum w_i^2` of normalized weights.
pub fn ess(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Draws `n_out` ancestor indices from the (possibly unnormalized)
/// probability vector `probs`. Output is nondecreasing.
pub fn resample(
    probs: &[f64],
    scheme: ResamplingScheme,
    n_out: usize,
    rng: &mut SmcRng,
) -> Vec<usize> {
    let m = n_out as f64;
    let points: Vec<f64> = match scheme {
        ResamplingScheme::Multinomial => {
            let mut u: Vec<f64> = (0..n_out).map(|_| rng.random::<f64>()).collect();
            u.sort_by(|a, b| a.partial_cmp(b).unwrap());
            u
        }
        ResamplingScheme::Stratified => (0..n_out)
            .map(|i| (i as f64 + rng.random::<f64>()) / m)
            .collect(),
        ResamplingScheme::Systematic => {
            let u0: f64 = rng.random();
            (0..n_out).map(|i| (i as f64 + u0) / m).collect()
        }
    };
    sorted_inverse_cdf(probs, &points)
}

/// Maps sorted points in `[0, 1)` through the inverse CDF of `probs`.
/// Zero-probability indices are never returned.
fn sorted_inverse_cdf(probs: &[f64], points: &[f64]) -> Vec<usize> {
    let mut cum = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p;
        cum.push(acc);
    }
    let total = acc;
    let last_positive = probs
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("resampling needs a positive probability");
    let mut out = Vec::with_capacity(points.len());
    let mut j = 0;
    for &u in points {
        let target = u * total;
        while j < last_positive && (target >= cum[j] || probs[j] <= 0.0) {
            j += 1;
        }
        out.push(j);
    }
    out
}
