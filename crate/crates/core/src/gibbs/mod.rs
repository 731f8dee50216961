//! Gibbs sampler for the mixed model
//!
//! ```text
//! y = x' beta + z' Lambda Gamma a_i + eps,   a_i ~ N(0, I_q),   eps ~ N(0, sigma2)
//! ```
//!
//! with a spike-and-slab g-prior on `beta`, zero-inflated half-normal
//! `lambda`, and either the NEG or the moment-matching prior on `gamma`.
//! One iteration updates, in order: `beta`, `g`, `J` (then `beta` again),
//! `lambda` and `phi2`, `gamma` (with the NEG scales), every `a_i`, `sigma2`.

mod steps;
mod summary;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use steps::{
    inclusion_log_odds, lambda_conditional, log_likelihood, step_a, step_beta, step_g, step_gamma, step_j, step_lambda,
    step_neg_d0, step_neg_delta2, step_neg_psi, step_phi2, step_sigma2, LambdaConditional,
};
pub use summary::{summarize, PosteriorSummary};

use crate::cholesky::n_gamma;
use crate::data::LongDataset;
use crate::dists::RngStream;
use crate::error::{Error, Result};
use crate::priors::{GammaPrior, MmPrior, PriorSpec};

/// Regressand used in the moment-matching `gamma` update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MmResponse {
    /// `y - x'beta - sum_l a_l lambda_l z_l`, the exact conjugate regression.
    #[default]
    Coherent,
    /// `y - x'beta`, keeping the `a' Lambda z` term in the response.
    Verbatim,
}

/// Prior on `gamma` in sampler-ready form.
#[derive(Debug, Clone)]
pub enum GammaModel {
    Neg { c0: f64, d0_shape: f64, d0_rate: f64 },
    Mm(MmPrior),
}

/// Design, responses and priors, preprocessed for the sampler.
#[derive(Debug, Clone)]
pub struct Model {
    pub(crate) n_subjects: usize,
    pub(crate) p: usize,
    pub(crate) q: usize,
    pub(crate) y: Vec<f64>,
    pub(crate) x: DMatrix<f64>,
    /// Nonzero entries of each random-design row.
    pub(crate) z: Vec<Vec<(usize, f64)>>,
    pub(crate) subject: Vec<usize>,
    pub(crate) subject_rows: Vec<Vec<usize>>,
    /// Rows whose random design has a nonzero entry `l`.
    pub(crate) effect_rows: Vec<Vec<usize>>,
    pub(crate) xtx: DMatrix<f64>,
    pub(crate) prior: PriorSpec,
    pub(crate) gamma_model: GammaModel,
    pub(crate) g_rate: f64,
    pub(crate) mm_response: MmResponse,
}

impl Model {
    pub fn new(data: &LongDataset, prior: PriorSpec) -> Result<Self> {
        if data.n_rows() == 0 {
            return Err(Error::Config("dataset has no observations".into()));
        }
        let x = DMatrix::from_fn(data.n_rows(), data.p(), |r, c| data.rows()[r].x[c]);
        let z: Vec<Vec<f64>> = data.rows().iter().map(|r| r.z.clone()).collect();
        let subject: Vec<usize> = data.rows().iter().map(|r| r.subject).collect();
        Self::from_parts(data.y(), x, &z, subject, data.n_subjects(), data.q(), prior)
    }

    /// Builds a model from dense pieces. `z` rows have length `q`; `subject`
    /// holds each row's subject index below `n_subjects`. `N = 0` is allowed.
    pub fn from_parts(
        y: Vec<f64>,
        x: DMatrix<f64>,
        z: &[Vec<f64>],
        subject: Vec<usize>,
        n_subjects: usize,
        q: usize,
        prior: PriorSpec,
    ) -> Result<Self> {
        prior.validate()?;
        let n = y.len();
        if x.nrows() != n || z.len() != n || subject.len() != n {
            return Err(Error::Dimension(format!(
                "{n} responses but {} x rows, {} z rows, {} subject labels",
                x.nrows(),
                z.len(),
                subject.len()
            )));
        }
        let mut subject_rows = vec![Vec::new(); n_subjects];
        let mut effect_rows = vec![Vec::new(); q];
        let mut zs = Vec::with_capacity(n);
        for (r, row) in z.iter().enumerate() {
            if row.len() != q {
                return Err(Error::Dimension(format!(
                    "z row {r} has length {}, expected {q}",
                    row.len()
                )));
            }
            let s = subject[r];
            if s >= n_subjects {
                return Err(Error::Dimension(format!("row {r} names subject {s} of {n_subjects}")));
            }
            subject_rows[s].push(r);
            let nz: Vec<(usize, f64)> = row.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect();
            for &(l, _) in &nz {
                effect_rows[l].push(r);
            }
            zs.push(nz);
        }
        let gamma_model = match prior.gamma {
            GammaPrior::Neg { c0, d0_shape, d0_rate } => GammaModel::Neg { c0, d0_shape, d0_rate },
            GammaPrior::Mm { u, v, method } => GammaModel::Mm(MmPrior::new(u, v, q, method)?),
        };
        let g_rate = prior.beta.g_rate.unwrap_or(n.max(1) as f64 / 2.0);
        let xtx = x.transpose() * &x;
        Ok(Model {
            n_subjects,
            p: x.ncols(),
            q,
            y,
            x,
            z: zs,
            subject,
            subject_rows,
            effect_rows,
            xtx,
            prior,
            gamma_model,
            g_rate,
            mm_response: MmResponse::Coherent,
        })
    }

    /// Replaces the `gamma` prior, e.g. with a precomputed MM prior. The
    /// stored [`PriorSpec`] is updated to match.
    pub fn with_gamma_model(mut self, gamma_model: GammaModel) -> Result<Self> {
        self.prior.gamma = match &gamma_model {
            GammaModel::Mm(mm) => {
                if mm.q != self.q {
                    return Err(Error::Dimension(format!(
                        "MM prior for q = {} used with q = {}",
                        mm.q, self.q
                    )));
                }
                GammaPrior::Mm {
                    u: mm.u,
                    v: mm.v,
                    method: mm.method,
                }
            }
            &GammaModel::Neg { c0, d0_shape, d0_rate } => GammaPrior::Neg { c0, d0_shape, d0_rate },
        };
        self.gamma_model = gamma_model;
        Ok(self)
    }

    pub fn with_mm_response(mut self, response: MmResponse) -> Self {
        self.mm_response = response;
        self
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn gamma_model(&self) -> &GammaModel {
        &self.gamma_model
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn y_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Effective rate of the `g` prior.
    pub fn g_rate(&self) -> f64 {
        self.g_rate
    }

    /// Nonzero entries of the random design of row `r`.
    pub fn z_row(&self, r: usize) -> &[(usize, f64)] {
        &self.z[r]
    }

    pub fn subject_of(&self, r: usize) -> usize {
        self.subject[r]
    }
}

/// One full parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub beta: Vec<f64>,
    pub j: Vec<bool>,
    pub g: f64,
    /// Prior inclusion probability (fixed unless updated).
    pub p0: f64,
    pub lambda: Vec<f64>,
    pub phi2: Vec<f64>,
    pub gamma: Vec<f64>,
    /// NEG variances `psi`; empty under the MM prior.
    pub gamma_scales: Vec<f64>,
    pub delta2: f64,
    pub d0: f64,
    /// Latent effects, one row of length `q` per subject.
    pub a: Vec<Vec<f64>>,
    pub sigma2: f64,
    pub iteration: usize,
}

impl ChainState {
    /// `beta = 0`, all covariates included, `g = 1`, `lambda = sd(y)`,
    /// `gamma = 0`, `a = 0`, `sigma2 = var(y)` and unit scales.
    pub fn initial(model: &Model) -> Self {
        let n = model.y.len();
        let var = if n > 1 {
            let mean = model.y.iter().sum::<f64>() / n as f64;
            model.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let var = if var > 0.0 && var.is_finite() { var } else { 1.0 };
        let r = n_gamma(model.q);
        let neg = matches!(model.gamma_model, GammaModel::Neg { .. });
        ChainState {
            beta: vec![0.0; model.p],
            j: vec![true; model.p],
            g: 1.0,
            p0: model.prior.beta.p0,
            lambda: vec![var.sqrt(); model.q],
            phi2: vec![1.0; model.q],
            gamma: vec![0.0; r],
            gamma_scales: if neg { vec![1.0; r] } else { Vec::new() },
            delta2: 1.0,
            d0: 1.0,
            a: vec![vec![0.0; model.q]; model.n_subjects],
            sigma2: var,
            iteration: 0,
        }
    }

    pub fn n_included(&self) -> usize {
        self.j.iter().filter(|&&b| b).count()
    }
}

/// Sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub n_iter: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub n_chains: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            n_iter: 20_000,
            n_burnin: 10_000,
            thin: 1,
            n_chains: 1,
            seed: 1,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter < self.n_burnin {
            return Err(Error::Config(format!(
                "iterations ({}) below burn-in ({})",
                self.n_iter, self.n_burnin
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.n_chains == 0 {
            return Err(Error::Config("need at least one chain".into()));
        }
        Ok(())
    }

    pub fn n_kept(&self) -> usize {
        (self.n_iter - self.n_burnin) / self.thin
    }
}

/// A kept iteration. Latent effects are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub iteration: usize,
    pub beta: Vec<f64>,
    pub j: Vec<bool>,
    pub g: f64,
    pub p0: f64,
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma2: f64,
    pub delta2: f64,
    pub loglik: f64,
}

impl Draw {
    fn from_state(s: &ChainState, loglik: f64) -> Self {
        Draw {
            iteration: s.iteration,
            beta: s.beta.clone(),
            j: s.j.clone(),
            g: s.g,
            p0: s.p0,
            lambda: s.lambda.clone(),
            gamma: s.gamma.clone(),
            sigma2: s.sigma2,
            delta2: s.delta2,
            loglik,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub id: usize,
    pub draws: Vec<Draw>,
    /// Log-likelihood of every iteration, burn-in included.
    pub loglik: Vec<f64>,
}

/// Owns the random streams of one chain: a main stream for the global
/// updates and one stream per subject for the latent effects.
#[derive(Debug, Clone)]
pub struct ChainRng {
    pub main: RngStream,
    pub subjects: Vec<RngStream>,
}

impl ChainRng {
    pub fn new(seed: u64, chain: usize, n_subjects: usize) -> Self {
        let main = RngStream::new(seed).split(chain as u64);
        let subjects = (0..n_subjects).map(|s| main.split(s as u64)).collect();
        ChainRng { main, subjects }
    }
}

/// One full sweep over all conditionals.
pub fn gibbs_iteration(state: &mut ChainState, model: &Model, rng: &mut ChainRng) -> Result<()> {
    step_beta(state, model, &mut rng.main)?;
    step_g(state, model, &mut rng.main)?;
    step_j(state, model, &mut rng.main)?;
    step_lambda(state, model, &mut rng.main)?;
    step_phi2(state, model, &mut rng.main)?;
    step_gamma(state, model, &mut rng.main)?;
    step_a(state, model, &mut rng.subjects)?;
    step_sigma2(state, model, &mut rng.main)?;
    state.iteration += 1;
    Ok(())
}

/// Runs one chain. The latent effects are drawn from their conditional at
/// the initial values before the first sweep, so that the first `lambda`
/// update sees informative regressors.
pub fn run_chain(model: &Model, config: &FitConfig, chain: usize) -> Result<Chain> {
    config.validate()?;
    let mut rng = ChainRng::new(config.seed, chain, model.n_subjects);
    let mut state = ChainState::initial(model);
    step_a(&mut state, model, &mut rng.subjects).map_err(|e| Error::Sampler {
        iteration: 0,
        source: Box::new(e),
    })?;
    let mut draws = Vec::with_capacity(config.n_kept());
    let mut loglik = Vec::with_capacity(config.n_iter);
    for it in 0..config.n_iter {
        gibbs_iteration(&mut state, model, &mut rng).map_err(|e| Error::Sampler {
            iteration: it + 1,
            source: Box::new(e),
        })?;
        let ll = log_likelihood(&state, model);
        loglik.push(ll);
        if it >= config.n_burnin && (it - config.n_burnin + 1).is_multiple_of(config.thin) {
            draws.push(Draw::from_state(&state, ll));
        }
    }
    Ok(Chain {
        id: chain,
        draws,
        loglik,
    })
}

/// Runs `config.n_chains` chains in parallel with disjoint streams.
pub fn fit(model: &Model, config: &FitConfig) -> Result<Vec<Chain>> {
    config.validate()?;
    (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_chain(model, config, c))
        .collect()
}
