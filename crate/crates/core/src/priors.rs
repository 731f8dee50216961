//! Prior hyperparameters and the moment-matching prior for `gamma`.
//!
//! The moment-matching (MM) prior places `gamma ~ N(mu, Psi)` with `mu` and
//! `Psi` chosen so that every induced correlation `rho[m][l]` has a common
//! prior mean `u` and variance `v`. The closed-form solution linearizes the
//! correlation map around `mu`; [`MmPrior::calibrated`] starts from it and
//! corrects the nonlinearity by Monte-Carlo moment matching with common
//! random numbers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cholesky::{n_gamma, tri_index, tri_pairs};
use crate::dists::{draw_gamma, RngStream};
use crate::error::{Error, Result};
use crate::linalg::{clip_eigenvalues, min_eigenvalue, CholeskyFactor};

/// Spike-and-slab inclusion plus Zellner g-prior for the fixed effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BetaPrior {
    /// Prior inclusion probability of each covariate.
    pub p0: f64,
    /// Resample `p0` from its Beta full conditional.
    pub update_p0: bool,
    pub a_p: f64,
    pub b_p: f64,
    pub g_shape: f64,
    /// `None` means `N / 2`.
    pub g_rate: Option<f64>,
}

impl Default for BetaPrior {
    fn default() -> Self {
        BetaPrior {
            p0: 0.5,
            update_p0: false,
            a_p: 1.0,
            b_p: 1.0,
            g_shape: 0.5,
            g_rate: None,
        }
    }
}

/// Zero-inflated half-normal prior for `lambda` with an inverse-gamma scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LambdaPrior {
    /// Prior probability that `lambda_l = 0`.
    pub p_zero: f64,
    pub phi_shape: f64,
    pub phi_rate: f64,
}

impl Default for LambdaPrior {
    fn default() -> Self {
        LambdaPrior {
            p_zero: 0.5,
            phi_shape: 0.5,
            phi_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MmMethod {
    ClosedForm,
    #[default]
    Calibrated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaPrior {
    /// Normal-exponential-gamma shrinkage: `gamma | psi ~ N(0, psi)`,
    /// `psi ~ Exp(delta2 / 2)`, `delta2 ~ G(c0, d0)`, `d0 ~ G(d0_shape, d0_rate)`.
    Neg { c0: f64, d0_shape: f64, d0_rate: f64 },
    /// Moment matching to a common correlation mean `u` and variance `v`.
    Mm {
        u: f64,
        v: f64,
        #[serde(default)]
        method: MmMethod,
    },
}

impl GammaPrior {
    pub fn neg() -> Self {
        GammaPrior::Neg {
            c0: 1.0,
            d0_shape: 1.0,
            d0_rate: 1.0,
        }
    }

    pub fn mm() -> Self {
        GammaPrior::Mm {
            u: 0.1,
            v: 0.09,
            method: MmMethod::Calibrated,
        }
    }

    pub fn is_mm(&self) -> bool {
        matches!(self, GammaPrior::Mm { .. })
    }
}

impl Default for GammaPrior {
    fn default() -> Self {
        GammaPrior::neg()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sigma2Prior {
    /// `p(sigma2) ~ 1 / sigma2`.
    #[default]
    Jeffreys,
    InverseGamma {
        shape: f64,
        rate: f64,
    },
}

impl Sigma2Prior {
    /// `(shape, rate)` added to the conjugate update; zero for Jeffreys.
    pub fn shape_rate(&self) -> (f64, f64) {
        match *self {
            Sigma2Prior::Jeffreys => (0.0, 0.0),
            Sigma2Prior::InverseGamma { shape, rate } => (shape, rate),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PriorSpec {
    pub beta: BetaPrior,
    pub lambda: LambdaPrior,
    pub gamma: GammaPrior,
    pub sigma2: Sigma2Prior,
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value })
    }
}

fn probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value })
    }
}

impl PriorSpec {
    pub fn with_gamma(gamma: GammaPrior) -> Self {
        PriorSpec {
            gamma,
            ..PriorSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        probability("p0", self.beta.p0)?;
        positive("a_p", self.beta.a_p)?;
        positive("b_p", self.beta.b_p)?;
        positive("g_shape", self.beta.g_shape)?;
        if let Some(rate) = self.beta.g_rate {
            positive("g_rate", rate)?;
        }
        probability("p_zero", self.lambda.p_zero)?;
        positive("phi_shape", self.lambda.phi_shape)?;
        positive("phi_rate", self.lambda.phi_rate)?;
        match self.gamma {
            GammaPrior::Neg { c0, d0_shape, d0_rate } => {
                positive("c0", c0)?;
                positive("d0_shape", d0_shape)?;
                positive("d0_rate", d0_rate)?;
            }
            GammaPrior::Mm { u, v, .. } => validate_mm_target(u, v)?,
        }
        if let Sigma2Prior::InverseGamma { shape, rate } = self.sigma2 {
            positive("sigma2_shape", shape)?;
            positive("sigma2_rate", rate)?;
        }
        Ok(())
    }
}

/// `u` in `[-1, 1]` and `u +- 3 sqrt(v)` in `[-1, 1]`.
pub fn validate_mm_target(u: f64, v: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&u) {
        return Err(Error::InvalidParameter { name: "u", value: u });
    }
    positive("v", v)?;
    let spread = 3.0 * v.sqrt();
    if u - spread < -1.0 || u + spread > 1.0 {
        return Err(Error::InvalidParameter { name: "v", value: v });
    }
    Ok(())
}

/// Prior means of `gamma` whose induced correlations all equal `u`.
pub fn mm_solve_means(u: f64, q: usize) -> Result<Vec<f64>> {
    let mut mu = vec![0.0; n_gamma(q)];
    if q < 2 {
        return Ok(mu);
    }
    if u >= 1.0 {
        return Err(Error::InfeasibleTarget {
            m: 2,
            l: 1,
            reason: format!("u = {u} leaves no room below 1"),
        });
    }
    for m in 1..q {
        // Rows are 1-based in the formulas: row m + 1.
        let mm = (m + 1) as f64;
        let num = 1.0 + (mm - 2.0) * u;
        let den = (1.0 + (mm - 1.0) * u) * (1.0 - u);
        if !(num > 0.0 && den > 0.0) {
            return Err(Error::InfeasibleTarget {
                m: m + 1,
                l: 1,
                reason: format!("radicand {num}/{den} is not positive for u = {u}"),
            });
        }
        let mu_m1 = u * (num / den).sqrt();
        mu[tri_index(m, 0)] = mu_m1;
        for l in 1..m {
            let ll = (l + 1) as f64;
            let den = (1.0 + (ll - 2.0) * u) * (1.0 + (ll - 1.0) * u);
            if !(den > 0.0) {
                return Err(Error::InfeasibleTarget {
                    m: m + 1,
                    l: l + 1,
                    reason: format!("radicand denominator {den} is not positive for u = {u}"),
                });
            }
            mu[tri_index(m, l)] = mu_m1 * ((1.0 - u) / den).sqrt();
        }
    }
    Ok(mu)
}

fn row(gamma: &[f64], m: usize) -> &[f64] {
    let start = tri_index(m.max(1), 0) * usize::from(m > 0);
    &gamma[start..start + m]
}

/// `d_ml = (1 + |row l|^2)^{-1/2} (1 + |row m|^2)^{-3/2}`.
fn d_coefficient(mu: &[f64], m: usize, l: usize) -> f64 {
    let a = 1.0 + row(mu, l).iter().map(|x| x * x).sum::<f64>();
    let b = 1.0 + row(mu, m).iter().map(|x| x * x).sum::<f64>();
    a.powf(-0.5) * b.powf(-1.5)
}

/// `d h(mu_[ml]) / d mu_mk` for `k < m` (three cases: `k < l`, `k = l`, `k > l`).
pub fn partial_row_m(mu: &[f64], m: usize, l: usize, k: usize) -> f64 {
    debug_assert!(l < m && k < m);
    let rm = row(mu, m);
    let rl = row(mu, l);
    let b = 1.0 + rm.iter().map(|x| x * x).sum::<f64>();
    let num = |l: usize, rl: &[f64]| rm[l] + (0..l).map(|r| rl[r] * rm[r]).sum::<f64>();
    if k < l {
        d_coefficient(mu, m, l) * (rl[k] * b - num(l, rl) * rm[k])
    } else if k == l {
        d_coefficient(mu, m, k) * (b - rm[k] * num(k, row(mu, k)))
    } else {
        -d_coefficient(mu, m, l) * rm[k] * num(l, rl)
    }
}

/// `d h(mu_[ml]) / d mu_lj` for `j < l`.
pub fn partial_row_l(mu: &[f64], m: usize, l: usize, j: usize) -> f64 {
    debug_assert!(j < l && l < m);
    let rm = row(mu, m);
    let rl = row(mu, l);
    let a = 1.0 + rl.iter().map(|x| x * x).sum::<f64>();
    let b = 1.0 + rm.iter().map(|x| x * x).sum::<f64>();
    let num = rm[l] + (0..l).map(|r| rl[r] * rm[r]).sum::<f64>();
    a.powf(-1.5) * b.powf(-0.5) * (rm[j] * a - num * rl[j])
}

/// First-order variance of `rho[m][l]` under `gamma ~ (mu, cov)` using the
/// full gradient of the correlation map.
pub fn linearized_variance(mu: &[f64], cov: &DMatrix<f64>, m: usize, l: usize) -> f64 {
    let mut idx = Vec::with_capacity(m + l);
    let mut grad = Vec::with_capacity(m + l);
    for k in 0..m {
        idx.push(tri_index(m, k));
        grad.push(partial_row_m(mu, m, l, k));
    }
    for j in 0..l {
        idx.push(tri_index(l, j));
        grad.push(partial_row_l(mu, m, l, j));
    }
    let mut s = 0.0;
    for a in 0..idx.len() {
        for b in 0..idx.len() {
            s += grad[a] * cov[(idx[a], idx[b])] * grad[b];
        }
    }
    s
}

/// Solution of the linearized variance equations.
#[derive(Debug, Clone, PartialEq)]
pub struct MmVariances {
    /// Common within-row variance, indexed by 0-based row (entry 0 unused).
    pub within: Vec<f64>,
    /// Cross-row covariance attached to the larger row index (entries 0 and 1 unused).
    pub cross: Vec<f64>,
    /// Cross-row covariance per row pair `(m, l)`, `1 <= l < m`, before averaging.
    pub cross_pairs: Vec<(usize, usize, f64)>,
}

/// Within-row variances from the `l = 1` pairs and cross-row covariances from
/// the pairwise equations, averaged over the earlier row for each row.
pub fn mm_solve_variances(u: f64, v: f64, q: usize, mu: &[f64]) -> Result<MmVariances> {
    positive("v", v)?;
    let _ = u;
    let mut within = vec![0.0; q];
    for m in 1..q {
        let s: f64 = (0..m).map(|k| partial_row_m(mu, m, 0, k).powi(2)).sum();
        if !(s > 0.0) {
            return Err(Error::InfeasibleTarget {
                m: m + 1,
                l: 1,
                reason: "zero gradient in the within-row variance equation".into(),
            });
        }
        within[m] = v / s;
    }
    // Diagonal derivatives d h(mu_[mk]) / d mu_mk, summed per row.
    let diag_sum: Vec<f64> = (0..q)
        .map(|m| (0..m).map(|k| partial_row_m(mu, m, k, k)).sum())
        .collect();
    let mut cross = vec![0.0; q];
    let mut cross_pairs = Vec::new();
    for m in 2..q {
        let mut acc = 0.0;
        for l in 1..m {
            let s = diag_sum[l] * diag_sum[m];
            if s == 0.0 || !s.is_finite() {
                return Err(Error::InfeasibleTarget {
                    m: m + 1,
                    l: l + 1,
                    reason: "zero denominator in the cross-row covariance equation".into(),
                });
            }
            let c = -v / (2.0 * s);
            cross_pairs.push((m, l, c));
            acc += c;
        }
        cross[m] = acc / (m - 1) as f64;
    }
    Ok(MmVariances {
        within,
        cross,
        cross_pairs,
    })
}

/// Variance of `rho[m][l]` as given by the pairwise linearized equations:
/// `Var(rho_m1) = psi_m1 sum_k (dh/dmu_mk)^2` and, for `l >= 2`,
/// `Var(rho_l1) + Var(rho_m1) + 2 c sum_j sum_k D_lj D_mk`.
pub fn pairwise_equation_variance(mu: &[f64], within: &[f64], cross: f64, m: usize, l: usize) -> f64 {
    let var_row1 = |m: usize| -> f64 { within[m] * (0..m).map(|k| partial_row_m(mu, m, 0, k).powi(2)).sum::<f64>() };
    if l == 0 {
        return var_row1(m);
    }
    let dl: f64 = (0..l).map(|j| partial_row_m(mu, l, j, j)).sum();
    let dm: f64 = (0..m).map(|k| partial_row_m(mu, m, k, k)).sum();
    var_row1(l) + var_row1(m) + 2.0 * cross * dl * dm
}

/// Full covariance of the packed `gamma`. Returns the matrix and whether it
/// had to be projected onto the PSD cone.
pub fn mm_assemble_psi(within: &[f64], cross: &[f64], q: usize) -> (DMatrix<f64>, bool) {
    let r = n_gamma(q);
    let pairs: Vec<(usize, usize)> = tri_pairs(q).collect();
    let mut psi = DMatrix::<f64>::zeros(r, r);
    for (a, &(m, k)) in pairs.iter().enumerate() {
        for (b, &(l, j)) in pairs.iter().enumerate() {
            psi[(a, b)] = if m == l {
                if k == j {
                    within[m]
                } else {
                    0.0
                }
            } else {
                cross[m.max(l)]
            };
        }
    }
    if r == 0 {
        return (psi, false);
    }
    let scale = psi.diagonal().iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    if min_eigenvalue(&psi) < -1e-12 * scale.max(1.0) {
        let (clipped, _) = clip_eigenvalues(&psi, 0.0);
        (clipped, true)
    } else {
        (psi, false)
    }
}

/// Options for the Monte-Carlo refinement of the MM prior.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    pub draws: usize,
    pub iterations: usize,
    /// Upper bound on the within-row variance.
    pub max_psi: f64,
    pub seed: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            draws: 20_000,
            iterations: 80,
            max_psi: 10.0,
            seed: 0x4d4d_5052,
        }
    }
}

/// An assembled MM prior `gamma ~ N(mu, Psi)` with its precision.
///
/// Entries of one row are independent with variances `psi_coord`; rows share
/// the covariance `psi_cross[max(m, l)]`.
#[derive(Debug, Clone)]
pub struct MmPrior {
    pub q: usize,
    pub u: f64,
    pub v: f64,
    pub method: MmMethod,
    pub mu: Vec<f64>,
    /// Variance of each packed entry.
    pub psi_coord: Vec<f64>,
    pub psi_cross: Vec<f64>,
    pub cov: DMatrix<f64>,
    /// `Psi^{-1}`, ridged when the covariance was clipped.
    pub precision: DMatrix<f64>,
    /// `Psi^{-1} mu`.
    pub precision_mean: DVector<f64>,
    /// Set when negative eigenvalues of the assembled covariance were clipped.
    pub clipped: bool,
}

impl MmPrior {
    pub fn new(u: f64, v: f64, q: usize, method: MmMethod) -> Result<Self> {
        match method {
            MmMethod::ClosedForm => Self::closed_form(u, v, q),
            MmMethod::Calibrated => Self::calibrated(u, v, q, &CalibrationOptions::default()),
        }
    }

    /// The linearized solution with averaged cross-row covariances.
    pub fn closed_form(u: f64, v: f64, q: usize) -> Result<Self> {
        validate_mm_target(u, v)?;
        let mu = mm_solve_means(u, q)?;
        let vars = mm_solve_variances(u, v, q, &mu)?;
        let (cov, clipped) = mm_assemble_psi(&vars.within, &vars.cross, q);
        if clipped {
            log::warn!("moment-matching covariance for q = {q}, (u, v) = ({u}, {v}) was not PSD; eigenvalues clipped");
        }
        let psi_coord = tri_pairs(q).map(|(m, _)| vars.within[m]).collect();
        Self::finish(u, v, q, MmMethod::ClosedForm, mu, psi_coord, vars.cross, cov, clipped)
    }

    /// Closed-form start refined so that the Monte-Carlo moments of every
    /// `rho[m][l]` match `(u, v)`. Rows are independent and each entry's
    /// variance is capped at `opts.max_psi`. With independent entries
    /// `Var(rho[m][l])` cannot climb much past `1/(m+1)`, so for large `q` and
    /// `v` near that bound the last rows fall short.
    pub fn calibrated(u: f64, v: f64, q: usize, opts: &CalibrationOptions) -> Result<Self> {
        validate_mm_target(u, v)?;
        let mut mu = mm_solve_means(u, q)?;
        let vars = mm_solve_variances(u, v, q, &mu)?;
        let r = n_gamma(q);
        let mut coord: Vec<f64> = tri_pairs(q).map(|(m, _)| vars.within[m]).collect();
        if r > 0 {
            let mut rng = RngStream::new(opts.seed);
            let z: Vec<f64> = (0..opts.draws * r).map(|_| rng.standard_normal()).collect();
            let mut gamma = vec![0.0; r];
            let mut sum = vec![0.0; r];
            let mut sum_sq = vec![0.0; r];
            let mut rho = vec![0.0; r];
            for _ in 0..opts.iterations {
                sum.iter_mut().for_each(|s| *s = 0.0);
                sum_sq.iter_mut().for_each(|s| *s = 0.0);
                let sd: Vec<f64> = coord.iter().map(|w| w.sqrt()).collect();
                for d in 0..opts.draws {
                    let zd = &z[d * r..(d + 1) * r];
                    for i in 0..r {
                        gamma[i] = mu[i] + sd[i] * zd[i];
                    }
                    correlations_into(&gamma, q, &mut rho);
                    for i in 0..r {
                        sum[i] += rho[i];
                        sum_sq[i] += rho[i] * rho[i];
                    }
                }
                let n = opts.draws as f64;
                for i in 0..r {
                    let mean = sum[i] / n;
                    let var = (sum_sq[i] - n * mean * mean) / (n - 1.0);
                    if u != 0.0 {
                        let ratio = u / mean;
                        if ratio.is_finite() && ratio > 0.0 {
                            mu[i] *= ratio.powf(0.8);
                        } else {
                            mu[i] += u - mean;
                        }
                    }
                    if var > 0.0 {
                        coord[i] = (coord[i] * v / var).clamp(1e-8, opts.max_psi);
                    }
                }
            }
        }
        let cross = vec![0.0; q];
        let cov = DMatrix::from_diagonal(&DVector::from_column_slice(&coord));
        Self::finish(u, v, q, MmMethod::Calibrated, mu, coord, cross, cov, false)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        u: f64,
        v: f64,
        q: usize,
        method: MmMethod,
        mu: Vec<f64>,
        psi_coord: Vec<f64>,
        psi_cross: Vec<f64>,
        cov: DMatrix<f64>,
        clipped: bool,
    ) -> Result<Self> {
        let r = cov.nrows();
        let mut to_invert = cov.clone();
        if clipped && r > 0 {
            let ridge = 1e-8 * cov.trace() / r as f64;
            for i in 0..r {
                to_invert[(i, i)] += ridge;
            }
        }
        let precision = if r == 0 {
            DMatrix::zeros(0, 0)
        } else {
            CholeskyFactor::new(&to_invert)?.inverse()
        };
        let precision_mean = &precision * DVector::from_column_slice(&mu);
        Ok(MmPrior {
            q,
            u,
            v,
            method,
            mu,
            psi_coord,
            psi_cross,
            cov,
            precision,
            precision_mean,
            clipped,
        })
    }

    /// Draws `gamma ~ N(mu, Psi)`.
    pub fn sample(&self, rng: &mut RngStream) -> Result<Vec<f64>> {
        let mean = DVector::from_column_slice(&self.mu);
        let draw = if self.is_diagonal() {
            DVector::from_fn(self.mu.len(), |i, _| {
                mean[i] + self.cov[(i, i)].sqrt() * rng.standard_normal()
            })
        } else {
            let (l, _) = psd_root(&self.cov);
            let z = DVector::from_fn(self.mu.len(), |_, _| rng.standard_normal());
            mean + l * z
        };
        Ok(draw.iter().copied().collect())
    }

    pub fn is_diagonal(&self) -> bool {
        self.psi_cross.iter().all(|&c| c == 0.0)
    }
}

/// A square root `R` with `R R' = A` for a PSD matrix via its eigendecomposition.
pub fn psd_root(a: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let eig = a.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let sqrt_vals = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    (&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals), min)
}

/// All correlations `rho[m][l]` of the packed `gamma`, written in packed order.
pub fn correlations_into(gamma: &[f64], q: usize, out: &mut [f64]) {
    let mut norm = vec![1.0; q];
    for m in 1..q {
        norm[m] = (1.0 + row(gamma, m).iter().map(|g| g * g).sum::<f64>()).sqrt();
    }
    for (m, l) in tri_pairs(q) {
        let rm = row(gamma, m);
        let rl = row(gamma, l);
        let mut num = rm[l];
        for r in 0..l {
            num += rl[r] * rm[r];
        }
        out[tri_index(m, l)] = num / (norm[m] * norm[l]);
    }
}

/// Initial NEG scales: `delta2 ~ G(c0, d0)` and `psi ~ Exp(delta2 / 2)`.
pub fn neg_init(rng: &mut RngStream, c0: f64, d0: f64, r: usize) -> Result<(f64, Vec<f64>)> {
    let delta2 = draw_gamma(rng, c0, d0)?;
    let psi = (0..r)
        .map(|_| (2.0 / delta2 * rng.standard_exponential()).max(f64::MIN_POSITIVE))
        .collect();
    Ok((delta2, psi))
}
