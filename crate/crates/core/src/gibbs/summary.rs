use nalgebra::DMatrix;

use super::Chain;
use crate::cholesky::{compose, corr_matrix, CholeskyFactors};
use crate::error::{Error, Result};

/// Posterior means and equal-tailed 95% intervals pooled over chains.
///
/// Intervals are empirical 2.5% and 97.5% quantiles. For spike-and-slab
/// quantities the mean can fall outside them when most mass sits at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub omega_mean: DMatrix<f64>,
    pub rho_mean: DMatrix<f64>,
    pub rho_lower: DMatrix<f64>,
    pub rho_upper: DMatrix<f64>,
    pub beta_mean: Vec<f64>,
    pub beta_lower: Vec<f64>,
    pub beta_upper: Vec<f64>,
    /// Posterior mean of `J`.
    pub inclusion_prob: Vec<f64>,
    /// Posterior frequency of `lambda_l = 0`.
    pub lambda_zero_prob: Vec<f64>,
    pub lambda_mean: Vec<f64>,
    pub gamma_mean: Vec<f64>,
    pub sigma2_mean: f64,
    pub n_samples_used: usize,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = prob * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn interval(mut xs: Vec<f64>) -> (f64, f64) {
    xs.sort_by(f64::total_cmp);
    (quantile_sorted(&xs, 0.025), quantile_sorted(&xs, 0.975))
}

/// Pools every kept draw of every chain. `Omega` and `rho` are computed per
/// draw from `(lambda, gamma)`.
pub fn summarize(chains: &[Chain]) -> Result<PosteriorSummary> {
    let draws: Vec<_> = chains.iter().flat_map(|c| c.draws.iter()).collect();
    let n = draws.len();
    if n == 0 {
        return Err(Error::NoSamples);
    }
    let q = draws[0].lambda.len();
    let p = draws[0].beta.len();
    let nf = n as f64;
    let mut omega_mean = DMatrix::<f64>::zeros(q, q);
    let mut rho_mean = DMatrix::<f64>::zeros(q, q);
    let mut rho_traces = vec![Vec::with_capacity(n); q * q];
    let mut beta_traces = vec![Vec::with_capacity(n); p];
    let mut inclusion_prob = vec![0.0; p];
    let mut lambda_zero_prob = vec![0.0; q];
    let mut lambda_mean = vec![0.0; q];
    let mut gamma_mean = vec![0.0; draws[0].gamma.len()];
    let mut sigma2_mean = 0.0;
    for d in &draws {
        let f = CholeskyFactors::new(d.lambda.clone(), d.gamma.clone())?;
        omega_mean += compose(&f).matrix();
        let rho = corr_matrix(&f).matrix;
        rho_mean += &rho;
        for i in 0..q {
            for j in 0..q {
                rho_traces[i * q + j].push(rho[(i, j)]);
            }
        }
        for k in 0..p {
            beta_traces[k].push(d.beta[k]);
            if d.j[k] {
                inclusion_prob[k] += 1.0;
            }
        }
        for l in 0..q {
            if d.lambda[l] == 0.0 {
                lambda_zero_prob[l] += 1.0;
            }
            lambda_mean[l] += d.lambda[l] / nf;
        }
        for (g, &x) in gamma_mean.iter_mut().zip(&d.gamma) {
            *g += x / nf;
        }
        sigma2_mean += d.sigma2 / nf;
    }
    omega_mean /= nf;
    rho_mean /= nf;
    let mut rho_lower = DMatrix::<f64>::zeros(q, q);
    let mut rho_upper = DMatrix::<f64>::zeros(q, q);
    for i in 0..q {
        for j in 0..q {
            let (lo, hi) = interval(std::mem::take(&mut rho_traces[i * q + j]));
            rho_lower[(i, j)] = lo;
            rho_upper[(i, j)] = hi;
        }
    }
    let beta_mean = beta_traces.iter().map(|t| t.iter().sum::<f64>() / nf).collect();
    let (beta_lower, beta_upper) = beta_traces.into_iter().map(interval).unzip();
    for x in inclusion_prob.iter_mut().chain(lambda_zero_prob.iter_mut()) {
        *x /= nf;
    }
    Ok(PosteriorSummary {
        omega_mean,
        rho_mean,
        rho_lower,
        rho_upper,
        beta_mean,
        beta_lower,
        beta_upper,
        inclusion_prob,
        lambda_zero_prob,
        lambda_mean,
        gamma_mean,
        sigma2_mean,
        n_samples_used: n,
    })
}
