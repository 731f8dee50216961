//! Truth covariance structures, synthetic datasets and the estimation loss.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::cholesky::{decompose, CovMatrix};
use crate::data::{indicator_names, indicator_z, LongDataset, Observation};
use crate::dists::RngStream;
use crate::error::{Error, Result};
use crate::linalg::{clip_eigenvalues, is_symmetric, min_eigenvalue};

/// Eigenvalue floor used when repairing the random structure.
const RANDOM_EIGEN_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    Identity,
    Tridiagonal,
    Circulant,
    BlockDiagonal,
    Random,
    Full,
}

impl StructureKind {
    pub const ALL: [StructureKind; 6] = [
        StructureKind::Identity,
        StructureKind::Tridiagonal,
        StructureKind::Circulant,
        StructureKind::BlockDiagonal,
        StructureKind::Random,
        StructureKind::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StructureKind::Identity => "identity",
            StructureKind::Tridiagonal => "tridiagonal",
            StructureKind::Circulant => "circulant",
            StructureKind::BlockDiagonal => "block_diagonal",
            StructureKind::Random => "random",
            StructureKind::Full => "full",
        }
    }
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StructureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StructureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown structure '{s}' (expected one of identity, tridiagonal, circulant, block_diagonal, random, full)"
                ))
            })
    }
}

/// A structure together with its size and shape parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub kind: StructureKind,
    pub q: usize,
    /// First off-diagonal for `tridiagonal`, `circulant` and `random`.
    pub off_diagonal: f64,
    /// Geometric decay for `block_diagonal` and `full`.
    pub decay: f64,
    /// Corner entries `(1, q)` and `(q, 1)` of `circulant`.
    pub corner: f64,
    pub n_blocks: usize,
    /// Seeds the extra entries of `random`.
    pub seed: u64,
}

impl StructureSpec {
    pub fn new(kind: StructureKind, q: usize) -> Self {
        let off_diagonal = match kind {
            StructureKind::Random => 0.4,
            _ => -0.488,
        };
        StructureSpec {
            kind,
            q,
            off_diagonal,
            decay: 0.8,
            corner: 0.4,
            n_blocks: 6,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_off_diagonal(mut self, value: f64) -> Self {
        self.off_diagonal = value;
        self
    }
}

fn decay_block(a: &mut DMatrix<f64>, lo: usize, hi: usize, decay: f64) {
    for i in lo..hi {
        for j in lo..hi {
            a[(i, j)] = decay.powi((i as i32 - j as i32).abs());
        }
    }
}

fn banded(q: usize, off: f64) -> DMatrix<f64> {
    let mut a = DMatrix::identity(q, q);
    for i in 1..q {
        a[(i, i - 1)] = off;
        a[(i - 1, i)] = off;
    }
    a
}

/// Extra symmetric pairs of the random structure: `q / 2` distinct positions
/// with `|m - l| >= 3`, values uniform on `[-0.6, -0.3] U [0.3, 0.6]`.
fn random_extras(q: usize, seed: u64) -> Vec<(usize, usize, f64)> {
    let slots: Vec<(usize, usize)> = (3..q).flat_map(|m| (0..=m - 3).map(move |l| (m, l))).collect();
    let k = (q / 2).min(slots.len());
    let mut rng = RngStream::new(seed).split(0x5eed);
    let picked = index::sample(&mut rng, slots.len(), k);
    picked
        .into_iter()
        .map(|i| {
            let (m, l) = slots[i];
            let magnitude = 0.3 + 0.3 * rng.uniform();
            let sign = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
            (m, l, sign * magnitude)
        })
        .collect()
}

/// Builds the truth matrix. Every result is symmetric positive definite; a
/// construction that is not fails rather than being silently altered, except
/// for `random`, whose extra entries are repaired by eigenvalue clipping and
/// rescaling to unit diagonal.
pub fn make_structure(spec: &StructureSpec) -> Result<CovMatrix> {
    let q = spec.q;
    if q < 2 {
        return Err(Error::Config(format!("structures need q >= 2, got {q}")));
    }
    let a = match spec.kind {
        StructureKind::Identity => DMatrix::identity(q, q),
        StructureKind::Tridiagonal => banded(q, spec.off_diagonal),
        StructureKind::Circulant => {
            if q < 3 {
                return Err(Error::Config("circulant structure needs q >= 3".into()));
            }
            let mut a = banded(q, spec.off_diagonal);
            a[(0, q - 1)] = spec.corner;
            a[(q - 1, 0)] = spec.corner;
            a
        }
        StructureKind::BlockDiagonal => {
            let nb = spec.n_blocks;
            if nb == 0 || q < nb {
                return Err(Error::Config(format!("{nb} blocks need q >= {nb}, got {q}")));
            }
            let size = q / nb;
            let mut a = DMatrix::zeros(q, q);
            for b in 0..nb {
                let hi = if b + 1 == nb { q } else { (b + 1) * size };
                decay_block(&mut a, b * size, hi, spec.decay);
            }
            a
        }
        StructureKind::Random => {
            let mut a = banded(q, spec.off_diagonal);
            for (m, l, v) in random_extras(q, spec.seed) {
                a[(m, l)] = v;
                a[(l, m)] = v;
            }
            let (a, clipped) = clip_eigenvalues(&a, RANDOM_EIGEN_FLOOR);
            if clipped {
                let d = DVector::from_fn(q, |i, _| a[(i, i)].sqrt().recip());
                let mut b = DMatrix::from_fn(q, q, |i, j| a[(i, j)] * d[i] * d[j]);
                for i in 0..q {
                    b[(i, i)] = 1.0;
                }
                (&b + b.transpose()) * 0.5
            } else {
                a
            }
        }
        StructureKind::Full => {
            let mut a = DMatrix::zeros(q, q);
            decay_block(&mut a, 0, q, spec.decay);
            a
        }
    };
    if !is_symmetric(&a, 1e-12) {
        return Err(Error::Generation(format!("{} structure is not symmetric", spec.kind)));
    }
    let min = min_eigenvalue(&a);
    if min <= 0.0 {
        return Err(Error::Generation(format!(
            "{} structure with q = {q} is not positive definite (smallest eigenvalue {min:.3e})",
            spec.kind
        )));
    }
    CovMatrix::new(a)
}

/// Complete-design dataset with the visit-indicator random design and no
/// fixed effects. Subject `i` gets `b_i = Lambda Gamma a_i`, `a_i ~ N(0, I)`,
/// from the factors of `omega`, drawn from its own split of `rng`; each row
/// adds `N(0, sigma2)` noise from the same subject stream.
pub fn simulate_dataset(
    omega: &CovMatrix,
    n_subjects: usize,
    n_visits: usize,
    n_responses: usize,
    sigma2: f64,
    rng: &RngStream,
) -> Result<LongDataset> {
    let q = omega.dim();
    if n_visits * n_responses != q {
        return Err(Error::Config(format!(
            "{n_responses} responses x {n_visits} visits does not match q = {q}"
        )));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "sigma2",
            value: sigma2,
        });
    }
    let factors = decompose(omega)?;
    let lg = DMatrix::from_diagonal(&DVector::from_column_slice(factors.lambda())) * factors.gamma_matrix();
    let sd = sigma2.sqrt();
    let width = n_subjects.to_string().len();
    let mut subjects = Vec::with_capacity(n_subjects);
    let mut rows = Vec::with_capacity(n_subjects * q);
    for i in 0..n_subjects {
        subjects.push(format!("s{:0width$}", i + 1));
        let mut r = rng.split(i as u64);
        let a = DVector::from_fn(q, |_, _| r.standard_normal());
        let b = &lg * a;
        for h in 1..=n_responses {
            for j in 1..=n_visits {
                let k = (h - 1) * n_visits + (j - 1);
                let noise = if sd > 0.0 { sd * r.standard_normal() } else { 0.0 };
                rows.push(Observation {
                    subject: i,
                    response: h,
                    visit: j,
                    y: b[k] + noise,
                    x: Vec::new(),
                    z: indicator_z(h, j, n_responses, n_visits),
                });
            }
        }
    }
    LongDataset::new(subjects, rows, Vec::new(), indicator_names(n_responses, n_visits))
}

/// Shape of a multi-response panel with covariates and missed visits.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDesign {
    pub subjects: usize,
    pub visits: usize,
    pub responses: usize,
    /// Subject-level covariates per response type.
    pub covariates: usize,
    /// Probability that a (response, visit) measurement is missing.
    pub missing_prob: f64,
    pub sigma2: f64,
    /// Fixed effects: intercept, then `covariates` per response in order.
    pub beta: Vec<f64>,
}

/// Panel with an intercept column `x0` and response-specific covariates
/// `x_h{h}_{k}` that are zero on the other responses' rows. Responses are
/// returned on the exponential scale, so loading with a log transform
/// recovers the linear predictor plus noise. The random design is the full
/// visit indicator whether or not a visit was observed.
pub fn simulate_panel(omega: &CovMatrix, design: &PanelDesign, rng: &RngStream) -> Result<LongDataset> {
    let (h_n, v_n, k_n) = (design.responses, design.visits, design.covariates);
    let q = h_n * v_n;
    if omega.dim() != q {
        return Err(Error::Config(format!(
            "{h_n} responses x {v_n} visits does not match q = {}",
            omega.dim()
        )));
    }
    let p = 1 + h_n * k_n;
    if design.beta.len() != p {
        return Err(Error::Config(format!(
            "beta has length {}, design has {p} columns",
            design.beta.len()
        )));
    }
    if !(0.0..1.0).contains(&design.missing_prob) {
        return Err(Error::InvalidParameter {
            name: "missing_prob",
            value: design.missing_prob,
        });
    }
    let factors = decompose(omega)?;
    let lg = DMatrix::from_diagonal(&DVector::from_column_slice(factors.lambda())) * factors.gamma_matrix();
    let sd = design.sigma2.sqrt();
    let mut x_names = vec!["x0".to_string()];
    for h in 1..=h_n {
        x_names.extend((1..=k_n).map(|k| format!("x_h{h}_{k}")));
    }
    let width = design.subjects.to_string().len();
    let mut subjects = Vec::with_capacity(design.subjects);
    let mut rows = Vec::new();
    for i in 0..design.subjects {
        subjects.push(format!("s{:0width$}", i + 1));
        let mut r = rng.split(i as u64);
        let a = DVector::from_fn(q, |_, _| r.standard_normal());
        let b = &lg * a;
        let covs: Vec<f64> = (0..h_n * k_n).map(|_| r.standard_normal()).collect();
        for h in 1..=h_n {
            for j in 1..=v_n {
                let noise = sd * r.standard_normal();
                if r.bernoulli(design.missing_prob) {
                    continue;
                }
                let mut x = vec![0.0; p];
                x[0] = 1.0;
                let lo = 1 + (h - 1) * k_n;
                x[lo..lo + k_n].copy_from_slice(&covs[(h - 1) * k_n..h * k_n]);
                let eta: f64 = x.iter().zip(&design.beta).map(|(a, b)| a * b).sum();
                rows.push(Observation {
                    subject: i,
                    response: h,
                    visit: j,
                    y: (eta + b[(h - 1) * v_n + j - 1] + noise).exp(),
                    x,
                    z: indicator_z(h, j, h_n, v_n),
                });
            }
        }
    }
    LongDataset::new(subjects, rows, x_names, indicator_names(h_n, v_n))
}

/// `(1 / q^2) * sqrt(sum_ij (est_ij - truth_ij)^2)`, exactly invariant under a
/// common permutation of rows and columns.
pub fn sel_loss(est: &CovMatrix, truth: &CovMatrix) -> Result<f64> {
    let q = truth.dim();
    if est.dim() != q {
        return Err(Error::Dimension(format!(
            "estimate is {}x{0}, truth is {q}x{q}",
            est.dim()
        )));
    }
    let mut sq: Vec<f64> = est
        .matrix()
        .iter()
        .zip(truth.matrix().iter())
        .map(|(a, b)| (a - b).powi(2))
        .collect();
    // Summing in sorted order makes the result independent of entry order.
    sq.sort_by(f64::total_cmp);
    Ok(sq.iter().sum::<f64>().sqrt() / (q * q) as f64)
}
