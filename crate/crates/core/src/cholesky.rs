//! Modified Cholesky parameterization `Omega = Lambda Gamma Gamma' Lambda`.
//!
//! `Lambda` is a nonnegative diagonal and `Gamma` is unit lower triangular.
//! The strictly-lower entries of `Gamma` are stored row by row,
//! `(g21, g31, g32, g41, ...)`, so entry `(m, l)` with `l < m` (0-based) sits
//! at `m (m - 1) / 2 + l`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CholeskyFactor;

/// Number of strictly-lower entries of a `q x q` matrix.
pub fn n_gamma(q: usize) -> usize {
    q * q.saturating_sub(1) / 2
}

/// Position of `gamma[m][l]` (0-based, `l < m`) in the packed vector.
#[inline]
pub fn tri_index(m: usize, l: usize) -> usize {
    debug_assert!(l < m);
    m * (m - 1) / 2 + l
}

/// All `(m, l)` pairs with `l < m < q` in packed order.
pub fn tri_pairs(q: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..q).flat_map(|m| (0..m).map(move |l| (m, l)))
}

/// Symmetric covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix(DMatrix<f64>);

impl CovMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "covariance must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if !crate::linalg::is_symmetric(&m, 1e-12) {
            return Err(Error::Dimension("covariance must be symmetric".into()));
        }
        Ok(CovMatrix(m))
    }

    pub fn identity(q: usize) -> Self {
        CovMatrix(DMatrix::identity(q, q))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

/// The pair `(lambda, gamma)` that induces a covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CholeskyFactors {
    lambda: Vec<f64>,
    gamma: Vec<f64>,
}

impl CholeskyFactors {
    pub fn new(lambda: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        let q = lambda.len();
        if gamma.len() != n_gamma(q) {
            return Err(Error::Dimension(format!(
                "q = {q} needs {} gamma entries, got {}",
                n_gamma(q),
                gamma.len()
            )));
        }
        if let Some(&bad) = lambda.iter().find(|&&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: bad,
            });
        }
        if let Some(&bad) = gamma.iter().find(|g| !g.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: bad,
            });
        }
        Ok(CholeskyFactors { lambda, gamma })
    }

    pub fn identity(q: usize) -> Self {
        CholeskyFactors {
            lambda: vec![1.0; q],
            gamma: vec![0.0; n_gamma(q)],
        }
    }

    pub fn q(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn gamma_at(&self, m: usize, l: usize) -> f64 {
        self.gamma[tri_index(m, l)]
    }

    /// The unit lower-triangular matrix `Gamma`.
    pub fn gamma_matrix(&self) -> DMatrix<f64> {
        gamma_matrix(self.q(), &self.gamma)
    }
}

pub fn gamma_matrix(q: usize, gamma: &[f64]) -> DMatrix<f64> {
    let mut g = DMatrix::identity(q, q);
    for (m, l) in tri_pairs(q) {
        g[(m, l)] = gamma[tri_index(m, l)];
    }
    g
}

/// `Lambda Gamma Gamma' Lambda`. Rows and columns with `lambda = 0` are
/// exactly zero.
pub fn compose(f: &CholeskyFactors) -> CovMatrix {
    let q = f.q();
    let mut b = f.gamma_matrix();
    for m in 0..q {
        let lm = f.lambda[m];
        for l in 0..=m {
            b[(m, l)] *= lm;
        }
    }
    let mut omega = DMatrix::<f64>::zeros(q, q);
    for i in 0..q {
        for j in 0..=i {
            let s: f64 = (0..=j).map(|k| b[(i, k)] * b[(j, k)]).sum();
            omega[(i, j)] = s;
            omega[(j, i)] = s;
        }
    }
    CovMatrix(omega)
}

/// Inverse of [`compose`] for symmetric positive definite input.
pub fn decompose(omega: &CovMatrix) -> Result<CholeskyFactors> {
    let chol = CholeskyFactor::new(omega.matrix())?;
    let l = chol.l();
    let q = omega.dim();
    let lambda: Vec<f64> = (0..q).map(|i| l[(i, i)]).collect();
    let mut gamma = vec![0.0; n_gamma(q)];
    for (m, k) in tri_pairs(q) {
        gamma[tri_index(m, k)] = l[(m, k)] / lambda[m];
    }
    Ok(CholeskyFactors { lambda, gamma })
}

/// Correlation `rho[m][l]` (`l < m`) from the packed `gamma` alone.
pub fn corr_from_gamma(gamma: &[f64], m: usize, l: usize) -> f64 {
    assert!(l < m, "corr_from_gamma needs l < m");
    let row_m = &gamma[tri_index(m, 0)..tri_index(m, 0) + m];
    let row_l = if l == 0 {
        &[][..]
    } else {
        &gamma[tri_index(l, 0)..tri_index(l, 0) + l]
    };
    let mut num = row_m[l];
    let mut ss_l = 1.0;
    for r in 0..l {
        num += row_l[r] * row_m[r];
        ss_l += row_l[r] * row_l[r];
    }
    let ss_m = 1.0 + row_m.iter().map(|g| g * g).sum::<f64>();
    num / (ss_l * ss_m).sqrt()
}

/// Correlation matrix of the induced covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrMatrix {
    pub matrix: DMatrix<f64>,
    /// Indices whose variance is zero; their off-diagonal entries are 0.
    pub excluded: Vec<usize>,
}

pub fn corr_matrix(f: &CholeskyFactors) -> CorrMatrix {
    let q = f.q();
    let omega = compose(f);
    let mut rho = DMatrix::<f64>::identity(q, q);
    let excluded: Vec<usize> = (0..q).filter(|&i| omega.get(i, i) <= 0.0).collect();
    let sd: Vec<f64> = (0..q).map(|i| omega.get(i, i).max(0.0).sqrt()).collect();
    for i in 0..q {
        for j in 0..i {
            let r = if sd[i] > 0.0 && sd[j] > 0.0 {
                omega.get(i, j) / (sd[i] * sd[j])
            } else {
                0.0
            };
            rho[(i, j)] = r;
            rho[(j, i)] = r;
        }
    }
    CorrMatrix { matrix: rho, excluded }
}

/// Coefficients `u` with `z' Lambda Gamma a = sum_l a_l lambda_l z_l + u' gamma`.
/// Entry `(m, l)` is `a_l lambda_m z_m`.
pub fn build_u_vector(a: &[f64], z: &[f64], lambda: &[f64]) -> Vec<f64> {
    let q = lambda.len();
    let mut u = vec![0.0; n_gamma(q)];
    for m in 1..q {
        let c = lambda[m] * z[m];
        if c == 0.0 {
            continue;
        }
        for l in 0..m {
            u[tri_index(m, l)] = a[l] * c;
        }
    }
    u
}

/// Coefficients `t` with `z' Lambda Gamma a = t' lambda`.
/// Entry `l` is `z_l (a_l + sum_{k<l} gamma_lk a_k)`.
pub fn build_t_vector(a: &[f64], z: &[f64], gamma: &[f64]) -> Vec<f64> {
    let q = a.len();
    (0..q)
        .map(|l| {
            let mut s = a[l];
            for k in 0..l {
                s += gamma[tri_index(l, k)] * a[k];
            }
            z[l] * s
        })
        .collect()
}
