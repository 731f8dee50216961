//! Random streams and the handful of laws the Gibbs sampler draws from.
//!
//! Gamma laws use the shape/rate convention throughout (mean `shape / rate`).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::CholeskyFactor;

/// A seeded, splittable random stream.
///
/// Streams built from the same seed and stream id produce identical draws.
/// Distinct stream ids address disjoint ChaCha streams, so chains and
/// benchmark cells never share state.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngStream { seed, stream, inner }
    }

    /// Derives an independent stream: same seed, stream id hashed from the
    /// parent stream and `id`, so nested splits do not collide.
    pub fn split(&self, id: u64) -> Self {
        let mut x = self.stream ^ id.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        // splitmix64 finalizer
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x ^= x >> 31;
        Self::with_stream(self.seed, x)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn standard_exponential(&mut self) -> f64 {
        Exp1.sample(&mut self.inner)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value })
    }
}

pub fn draw_normal(rng: &mut RngStream, mean: f64, var: f64) -> Result<f64> {
    if !(var >= 0.0) || !var.is_finite() {
        return Err(Error::InvalidParameter {
            name: "var",
            value: var,
        });
    }
    if var == 0.0 {
        return Ok(mean);
    }
    Ok(mean + var.sqrt() * rng.standard_normal())
}

/// Standard normal restricted to `[lower, inf)`.
fn truncated_standard_normal(rng: &mut RngStream, lower: f64) -> f64 {
    // Below this bound plain rejection accepts often enough; above it the
    // exponential proposal of Robert (1995) is used.
    const ROBERT_SWITCH: f64 = 0.45;
    if lower < ROBERT_SWITCH {
        loop {
            let z = rng.standard_normal();
            if z >= lower {
                return z;
            }
        }
    }
    let alpha = 0.5 * (lower + (lower * lower + 4.0).sqrt());
    loop {
        let z = lower + rng.standard_exponential() / alpha;
        let d = z - alpha;
        if rng.uniform() <= (-0.5 * d * d).exp() {
            return z;
        }
    }
}

/// Draw from `N(mean, var)` restricted to `[0, inf)`.
pub fn draw_truncated_normal_pos(rng: &mut RngStream, mean: f64, var: f64) -> Result<f64> {
    check_positive("var", var)?;
    if !mean.is_finite() {
        return Err(Error::InvalidParameter {
            name: "mean",
            value: mean,
        });
    }
    let sd = var.sqrt();
    let z = truncated_standard_normal(rng, -mean / sd);
    Ok((mean + sd * z).max(0.0))
}

pub fn draw_gamma(rng: &mut RngStream, shape: f64, rate: f64) -> Result<f64> {
    check_positive("shape", shape)?;
    check_positive("rate", rate)?;
    let dist = Gamma::new(shape, 1.0 / rate).map_err(|_| Error::InvalidParameter {
        name: "shape",
        value: shape,
    })?;
    // The smallest positive value is returned instead of an underflowed zero.
    Ok(dist.sample(rng).max(f64::MIN_POSITIVE))
}

pub fn draw_inverse_gamma(rng: &mut RngStream, shape: f64, rate: f64) -> Result<f64> {
    Ok(1.0 / draw_gamma(rng, shape, rate)?)
}

/// Wald draw with mean `mu` and shape `shape` (Michael, Schucany and Haas).
pub fn draw_inverse_gaussian(rng: &mut RngStream, mu: f64, shape: f64) -> Result<f64> {
    check_positive("shape", shape)?;
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter { name: "mu", value: mu });
    }
    let nu = rng.standard_normal();
    let y = nu * nu;
    if y == 0.0 {
        return Ok(mu.min(f64::MAX));
    }
    if !mu.is_finite() || mu > 1e150 {
        // Limit as mu -> inf: the Levy law shape / nu^2.
        return Ok(shape / y);
    }
    // Smaller root written as mu^2 / larger root to avoid cancellation.
    let big = 1.0 + mu * y / (2.0 * shape) + (4.0 * mu * shape * y + mu * mu * y * y).sqrt() / (2.0 * shape);
    let x = mu / big;
    if rng.uniform() * (mu + x) <= mu {
        Ok(x)
    } else {
        Ok(mu * big)
    }
}

/// Draw from `N(mean, cov)` via the lower Cholesky factor of `cov`.
/// An all-zero covariance is the degenerate law at `mean`.
pub fn draw_mvn(rng: &mut RngStream, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<DVector<f64>> {
    let k = mean.len();
    if cov.nrows() != k || cov.ncols() != k {
        return Err(Error::Dimension(format!(
            "mean has length {k} but covariance is {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if cov.iter().all(|&c| c == 0.0) {
        return Ok(mean.clone());
    }
    let chol = CholeskyFactor::new(cov)?;
    let z = DVector::from_fn(k, |_, _| rng.standard_normal());
    Ok(mean + chol.l() * z)
}

/// Draw from `N(Q^{-1} b, Q^{-1})` given the factor of the precision `Q`.
pub fn draw_mvn_precision(rng: &mut RngStream, precision: &CholeskyFactor, b: &DVector<f64>) -> DVector<f64> {
    let k = precision.dim();
    let mean = precision.solve(b);
    let z = DVector::from_fn(k, |_, _| rng.standard_normal());
    mean + precision.solve_upper(&z)
}

/// `ln Phi(x)` for the standard normal CDF, accurate far into the lower tail.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-0.5 * erfc(x / std::f64::consts::SQRT_2)).ln_1p()
    } else if x > -30.0 {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Asymptotic series of the Mills ratio.
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}
