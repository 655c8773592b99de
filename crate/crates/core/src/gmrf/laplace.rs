use super::{GaussianMrf, GmrfError, ObsData, ObsModel};
use crate::graph::minimum_degree;
use crate::sparse::{Cholesky, SymmetricMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceOptions {
    /// Stop when the iterate moves by at most this much in max norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LaplaceOptions {
    fn default() -> Self {
        LaplaceOptions { tol: 1e-8, max_iter: 100 }
    }
}

/// Gaussian approximation of the posterior, with per-site quadratic
/// surrogates `p~(y_t | x_t) = exp(a_t + b_t x_t - c_t x_t^2 / 2)`.
#[derive(Debug, Clone)]
pub struct LaplaceApprox {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub mode: Vec<f64>,
    /// `Q + diag(c)`.
    pub precision: SymmetricMatrix,
    /// `Q mu + b`.
    pub canonical_mean: Vec<f64>,
    /// Marginal likelihood of the surrogate model.
    pub log_z_tilde: f64,
    /// `sum_t log p(y_t | x^_t)`.
    pub log_p_at_mode: f64,
    /// `sum_t log p~(y_t | x^_t)`.
    pub log_ptilde_at_mode: f64,
    /// Number of updates applied before the iterate stopped moving.
    pub iterations: usize,
    /// Sites whose curvature had to be floored at zero.
    pub floored_sites: usize,
}

impl LaplaceApprox {
    /// `log p~(y_t | x)` for site `t` (original indexing).
    pub fn log_site(&self, t: usize, x: f64) -> f64 {
        self.a[t] + self.b[t] * x - 0.5 * self.c[t] * x * x
    }
}

/// Symmetric positive definite solver under a fill-reducing permutation.
pub(super) struct PermutedCholesky {
    perm: Vec<usize>,
    chol: Cholesky,
}

impl PermutedCholesky {
    pub(super) fn new(a: &SymmetricMatrix) -> Result<Self, GmrfError> {
        let adj: Vec<Vec<usize>> = (0..a.dim())
            .map(|j| a.column(j).map(|(i, _)| i).filter(|&i| i != j).collect())
            .collect();
        let perm = minimum_degree(&adj);
        let chol = Cholesky::factor(&a.permuted(&perm))?;
        Ok(PermutedCholesky { perm, chol })
    }

    pub(super) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let bp: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        let xp = self.chol.solve(&bp);
        let mut x = vec![0.0; b.len()];
        for (k, &i) in self.perm.iter().enumerate() {
            x[i] = xp[k];
        }
        x
    }

    pub(super) fn log_det(&self) -> f64 {
        self.chol.log_det()
    }
}

struct Sites {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    floored: usize,
}

fn linearize(obs: &ObsModel, data: &ObsData, x: &[f64]) -> Sites {
    let n = x.len();
    let mut s = Sites { a: Vec::with_capacity(n), b: Vec::with_capacity(n), c: Vec::with_capacity(n), floored: 0 };
    for t in 0..n {
        let (l, d1, d2) = obs.derivatives(data.y[t], data.trials[t], x[t]);
        let c = if d2 > 0.0 {
            s.floored += 1;
            0.0
        } else {
            -d2
        };
        let b = d1 + c * x[t];
        s.a.push(l - b * x[t] + 0.5 * c * x[t] * x[t]);
        s.b.push(b);
        s.c.push(c);
    }
    s
}

fn check_inputs(gmrf: &GaussianMrf, obs: &ObsModel, data: &ObsData) -> Result<(), GmrfError> {
    if data.len() != gmrf.dim() {
        return Err(GmrfError::Dimension(format!(
            "{} observations for {} sites",
            data.len(),
            gmrf.dim()
        )));
    }
    for t in 0..data.len() {
        obs.validate(data.y[t], data.trials[t])?;
    }
    Ok(())
}

/// Iterated second-order expansion of the log-likelihood around the
/// current guess, starting from the prior mean.
pub fn laplace_fit(
    gmrf: &GaussianMrf,
    obs: &ObsModel,
    data: &ObsData,
    opts: LaplaceOptions,
) -> Result<LaplaceApprox, GmrfError> {
    check_inputs(gmrf, obs, data)?;
    let q = gmrf.precision();
    let q_mu = q.mul_vec(gmrf.mean());
    let mut x = gmrf.mean().to_vec();
    for iter in 0..opts.max_iter {
        let s = linearize(obs, data, &x);
        let qt = q.add_diagonal(&s.c);
        let h: Vec<f64> = q_mu.iter().zip(&s.b).map(|(a, b)| a + b).collect();
        let next = PermutedCholesky::new(&qt)?.solve(&h);
        let change = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if change <= opts.tol {
            return finish(gmrf, obs, data, x, iter);
        }
    }
    Err(GmrfError::NoConvergence { max_iter: opts.max_iter, last: x })
}

fn finish(
    gmrf: &GaussianMrf,
    obs: &ObsModel,
    data: &ObsData,
    mode: Vec<f64>,
    iterations: usize,
) -> Result<LaplaceApprox, GmrfError> {
    let q = gmrf.precision();
    let mu = gmrf.mean();
    let s = linearize(obs, data, &mode);
    let precision = q.add_diagonal(&s.c);
    let canonical_mean: Vec<f64> = q.mul_vec(mu).iter().zip(&s.b).map(|(a, b)| a + b).collect();
    let post = PermutedCholesky::new(&precision)?;
    let prior = PermutedCholesky::new(q)?;
    let m = post.solve(&canonical_mean);
    let hm: f64 = canonical_mean.iter().zip(&m).map(|(a, b)| a * b).sum();
    let log_z_tilde = s.a.iter().sum::<f64>() + 0.5 * prior.log_det() - 0.5 * post.log_det() + 0.5 * hm
        - 0.5 * q.quad_form(mu);
    let mut log_p = 0.0;
    let mut log_pt = 0.0;
    for t in 0..mode.len() {
        log_p += obs.log_density(data.y[t], data.trials[t], mode[t]);
        log_pt += s.a[t] + s.b[t] * mode[t] - 0.5 * s.c[t] * mode[t] * mode[t];
    }
    Ok(LaplaceApprox {
        a: s.a,
        b: s.b,
        c: s.c,
        mode,
        precision,
        canonical_mean,
        log_z_tilde,
        log_p_at_mode: log_p,
        log_ptilde_at_mode: log_pt,
        iterations,
        floored_sites: s.floored,
    })
}

/// `log Z~ + log p(y | x^) - log p~(y | x^)`.
pub fn approx_loglik(la: &LaplaceApprox) -> f64 {
    la.log_z_tilde + la.log_p_at_mode - la.log_ptilde_at_mode
}

/// Gradient of `log p(x) + sum_t log p(y_t | x_t)` at `x`.
pub fn log_posterior_gradient(gmrf: &GaussianMrf, obs: &ObsModel, data: &ObsData, x: &[f64]) -> Vec<f64> {
    let d: Vec<f64> = x.iter().zip(gmrf.mean()).map(|(a, b)| a - b).collect();
    let qd = gmrf.precision().mul_vec(&d);
    (0..x.len())
        .map(|t| obs.derivatives(data.y[t], data.trials[t], x[t]).1 - qd[t])
        .collect()
}

/// Exact `log p(y)` when `y_t ~ N(x_t, sigma^2)`, from
/// `p(y) = p(y | m) p(m) / p(m | y)` at the posterior mean `m`.
pub fn gaussian_log_marginal(gmrf: &GaussianMrf, sigma: f64, y: &[f64]) -> Result<f64, GmrfError> {
    let n = gmrf.dim();
    if y.len() != n {
        return Err(GmrfError::Dimension(format!("{} observations for {n} sites", y.len())));
    }
    let q = gmrf.precision();
    let s2 = sigma * sigma;
    let post = q.add_diagonal(&vec![1.0 / s2; n]);
    let h: Vec<f64> = q.mul_vec(gmrf.mean()).iter().zip(y).map(|(a, yt)| a + yt / s2).collect();
    let post_chol = PermutedCholesky::new(&post)?;
    let m = post_chol.solve(&h);
    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let lik: f64 = y
        .iter()
        .zip(&m)
        .map(|(yt, mt)| -0.5 * (yt - mt).powi(2) / s2 - sigma.ln() - half_log_2pi)
        .sum();
    Ok(lik + gmrf.log_density(&m) - (0.5 * post_chol.log_det() - n as f64 * half_log_2pi))
}
