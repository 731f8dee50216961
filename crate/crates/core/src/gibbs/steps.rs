//! Full conditional updates. Gamma laws use shape/rate.

use nalgebra::{DMatrix, DVector};

use super::{ChainState, GammaModel, MmResponse, Model};
use crate::cholesky::{n_gamma, tri_index};
use crate::dists::{
    draw_gamma, draw_inverse_gamma, draw_inverse_gaussian, draw_mvn_precision, draw_truncated_normal_pos,
    ln_normal_cdf, RngStream,
};
use crate::error::{Error, Result};
use crate::linalg::CholeskyFactor;

/// `c_i = Gamma a_i` for every subject.
fn gamma_times_a(state: &ChainState, q: usize) -> Vec<Vec<f64>> {
    state
        .a
        .iter()
        .map(|a| {
            (0..q)
                .map(|m| {
                    let mut s = a[m];
                    for l in 0..m {
                        s += state.gamma[tri_index(m, l)] * a[l];
                    }
                    s
                })
                .collect()
        })
        .collect()
}

/// `z' Lambda Gamma a_i` per row.
fn random_part(state: &ChainState, model: &Model) -> Vec<f64> {
    let c = gamma_times_a(state, model.q);
    (0..model.n_rows())
        .map(|r| {
            let ci = &c[model.subject[r]];
            model.z[r].iter().map(|&(m, zm)| zm * state.lambda[m] * ci[m]).sum()
        })
        .collect()
}

/// `x' beta` per row.
fn fixed_part(state: &ChainState, model: &Model) -> Vec<f64> {
    let mut out = vec![0.0; model.n_rows()];
    for (k, &b) in state.beta.iter().enumerate() {
        if b != 0.0 {
            for (r, o) in out.iter_mut().enumerate() {
                *o += model.x[(r, k)] * b;
            }
        }
    }
    out
}

fn included(j: &[bool]) -> Vec<usize> {
    j.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

fn sub_matrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// Factor of `X_J' X_J`, naming the collinear columns on failure.
fn factor_design(model: &Model, idx: &[usize]) -> Result<CholeskyFactor> {
    let g = sub_matrix(&model.xtx, idx);
    match CholeskyFactor::new(&g) {
        Ok(f) => Ok(f),
        Err(Error::NotPositiveDefinite { pivot }) => {
            // Regress the failing column on the earlier ones to find its partners.
            let mut columns = vec![idx[pivot]];
            if pivot > 0 {
                let head = &idx[..pivot];
                if let Ok(f) = CholeskyFactor::new(&sub_matrix(&model.xtx, head)) {
                    let rhs = DVector::from_fn(pivot, |a, _| model.xtx[(head[a], idx[pivot])]);
                    let coef = f.solve(&rhs);
                    for (a, &c) in coef.iter().enumerate() {
                        if c.abs() > 1e-8 {
                            columns.push(head[a]);
                        }
                    }
                }
            }
            columns.sort_unstable();
            Err(Error::SingularDesign { columns })
        }
        Err(e) => Err(e),
    }
}

fn quad_form(m: &DMatrix<f64>, idx: &[usize], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for (a, &i) in idx.iter().enumerate() {
        for (b, &k) in idx.iter().enumerate() {
            s += v[a] * m[(i, k)] * v[b];
        }
    }
    s
}

/// `beta_J ~ N(mu, Sigma)` with `Sigma^{-1} = (1 + g) X_J'X_J / sigma2` and
/// `mu = (X_J'X_J)^{-1} X_J' phi / (1 + g)`, `phi = y - z' Lambda Gamma a`.
/// Excluded coefficients are set to exactly zero.
pub fn step_beta(state: &mut ChainState, model: &Model, rng: &mut RngStream) -> Result<()> {
    let idx = included(&state.j);
    state.beta.iter_mut().for_each(|b| *b = 0.0);
    if idx.is_empty() {
        return Ok(());
    }
    if model.n_rows() == 0 {
        return Err(Error::Config(
            "fixed-effects update needs at least one observation".into(),
        ));
    }
    factor_design(model, &idx)?;
    let rp = random_part(state, model);
    let phi: Vec<f64> = model.y.iter().zip(&rp).map(|(y, r)| y - r).collect();
    let scale = (1.0 + state.g) / state.sigma2;
    let prec = sub_matrix(&model.xtx, &idx) * scale;
    let b = DVector::from_fn(idx.len(), |a, _| {
        (0..model.n_rows()).map(|r| model.x[(r, idx[a])] * phi[r]).sum::<f64>() / state.sigma2
    });
    let draw = draw_mvn_precision(rng, &CholeskyFactor::new(&prec)?, &b);
    for (a, &k) in idx.iter().enumerate() {
        state.beta[k] = draw[a];
    }
    Ok(())
}

/// `g ~ G(g_shape + p_J/2, g_rate + beta_J' X_J'X_J beta_J / (2 sigma2))`.
pub fn step_g(state: &mut ChainState, model: &Model, rng: &mut RngStream) -> Result<()> {
    let idx = included(&state.j);
    let bj: Vec<f64> = idx.iter().map(|&k| state.beta[k]).collect();
    let qf = quad_form(&model.xtx, &idx, &bj);
    let shape = model.prior.beta.g_shape + idx.len() as f64 / 2.0;
    let rate = model.g_rate + qf / (2.0 * state.sigma2);
    state.g = draw_gamma(rng, shape, rate)?;
    Ok(())
}

/// `phi' X_J (X_J'X_J)^{-1} X_J' phi`, or `None` when `X_J` is rank deficient.
fn projection(model: &Model, idx: &[usize], xtphi: &[f64]) -> Option<f64> {
    if idx.is_empty() {
        return Some(0.0);
    }
    let f = CholeskyFactor::new(&sub_matrix(&model.xtx, idx)).ok()?;
    let b = DVector::from_fn(idx.len(), |a, _| xtphi[idx[a]]);
    Some(b.dot(&f.solve(&b)))
}

/// Log odds of `J_l = 1` against `J_l = 0` with `beta` integrated out:
/// `ln(p0/(1-p0)) - ln(1 + 1/g)/2 + (P_1 - P_0) / (2 sigma2 (1 + g))`,
/// where `P_J = phi' X_J (X_J'X_J)^{-1} X_J' phi`.
pub fn inclusion_log_odds(p0: f64, g: f64, sigma2: f64, proj_in: f64, proj_out: f64) -> f64 {
    (p0 / (1.0 - p0)).ln() - 0.5 * (1.0 + 1.0 / g).ln() + (proj_in - proj_out) / (2.0 * sigma2 * (1.0 + g))
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Coordinate-wise inclusion update with `beta` marginalized, followed by the
/// optional `p0` update and a fresh draw of `beta` for the new `J`.
pub fn step_j(state: &mut ChainState, model: &Model, rng: &mut RngStream) -> Result<()> {
    if model.p == 0 {
        return Ok(());
    }
    let rp = random_part(state, model);
    let phi: Vec<f64> = model.y.iter().zip(&rp).map(|(y, r)| y - r).collect();
    let xtphi: Vec<f64> = (0..model.p)
        .map(|k| (0..model.n_rows()).map(|r| model.x[(r, k)] * phi[r]).sum())
        .collect();
    for l in 0..model.p {
        let p0 = state.p0;
        let on = if p0 >= 1.0 {
            true
        } else if p0 <= 0.0 {
            false
        } else {
            state.j[l] = true;
            let with = projection(model, &included(&state.j), &xtphi);
            state.j[l] = false;
            let without = projection(model, &included(&state.j), &xtphi).unwrap_or(0.0);
            match with {
                Some(pin) => {
                    let lo = inclusion_log_odds(p0, state.g, state.sigma2, pin, without);
                    rng.uniform() < logistic(lo)
                }
                None => {
                    log::debug!("covariate {l} is collinear with the current model; excluded");
                    false
                }
            }
        };
        state.j[l] = on;
    }
    if model.prior.beta.update_p0 {
        let k = state.n_included() as f64;
        let a = model.prior.beta.a_p + k;
        let b = model.prior.beta.b_p + model.p as f64 - k;
        let x = draw_gamma(rng, a, 1.0)?;
        let y = draw_gamma(rng, b, 1.0)?;
        state.p0 = x / (x + y);
    }
    step_beta(state, model, rng)
}

/// Slab-versus-spike summary of the `lambda_l` conditional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaConditional {
    /// Posterior probability that `lambda_l = 0`.
    pub p_zero: f64,
    /// Location and variance of the truncated-normal slab.
    pub mean: f64,
    pub var: f64,
}

/// Conditional of `lambda_l` from the sufficient statistics
/// `a = sum t^2 / sigma2` and `b = sum t r / sigma2`, slab variance `phi2`,
/// and prior zero probability `p_zero`.
pub fn lambda_conditional(a: f64, b: f64, phi2: f64, p_zero: f64) -> LambdaConditional {
    let prec = a + 1.0 / phi2;
    let var = 1.0 / prec;
    let mean = b * var;
    let p_hat = if p_zero >= 1.0 {
        1.0
    } else if p_zero <= 0.0 {
        0.0
    } else {
        let sd = var.sqrt();
        let log_r = ((1.0 - p_zero) / p_zero).ln() + std::f64::consts::LN_2 + sd.ln() - 0.5 * phi2.ln()
            + mean * mean / (2.0 * var)
            + ln_normal_cdf(mean / sd);
        logistic(-log_r)
    };
    LambdaConditional {
        p_zero: p_hat,
        mean,
        var,
    }
}

/// Coordinate-wise `lambda_l` update from its zero-inflated truncated-normal
/// conditional given `t_l = z_l (Gamma a_i)_l`.
pub fn step_lambda(state: &mut ChainState, model: &Model, rng: &mut RngStream) -> Result<()> {
    let c = gamma_times_a(state, model.q);
    let mut rp = random_part(state, model);
    let fp = fixed_part(state, model);
    let p_zero = model.prior.lambda.p_zero;
    for l in 0..model.q {
        let (mut a, mut b) = (0.0, 0.0);
        for &r in &model.effect_rows[l] {
            let zl = model.z[r]
                .iter()
                .find(|&&(m, _)| m == l)
                .map(|&(_, v)| v)
                .unwrap_or(0.0);
            let t = zl * c[model.subject[r]][l];
            let resid = model.y[r] - fp[r] - rp[r] + t * state.lambda[l];
            a += t * t;
            b += t * resid;
        }
        let cond = lambda_conditional(a / state.sigma2, b / state.sigma2, state.phi2[l], p_zero);
        let new = if rng.uniform() < cond.p_zero {
            0.0
        } else {
            draw_truncated_normal_pos(rng, cond.mean, cond.var)?
        };
        let delta = new - state.lambda[l];
        if delta != 0.0 {
            for &r in &model.effect_rows[l] {
                let zl = model.z[r]
                    .iter()
                    .find(|&&(m, _)| m == l)
                    .map(|&(_, v)| v)
                    .unwrap_or(0.0);
                rp[r] += zl * c[model.subject[r]][l] * delta;
            }
        }
        state.lambda[l] = new;
    }
    Ok(())
}

/// `phi_l^2 ~ IG(shape + 1/2, rate + lambda_l^2 / 2)` when `lambda_l > 0`,
/// the prior otherwise.
pub fn step_phi2(state: &mut ChainState, model: &Model, rng: &mut RngStream) -> Result<()> {
    let (shape, rate) = (model.prior.lambda.phi_shape, model.prior.lambda.phi_rate);
    for l in 0..model.q {
        let lam = state.lambda[l];
        state.phi2[l] = if lam > 0.0 {
            draw_inverse_gamma(rng, shape + 0.5, rate + 0.5 * lam * lam)?
        } else {
            draw_inverse_gamma(rng, shape, rate)?
        };
    }
    Ok(())
}

/// `sum u u' / sigma2` and `sum u w / sigma2` over all rows.
fn gamma_regression(state: &ChainState, model: &Model, include_diag_term: bool) -> (DMatrix<f64>, DVector<f64>) {
    let r = n_gamma(model.q);
    let mut uu = DMatrix::<f64>::zeros(r, r);
    let mut uw = DVector::<f64>::zeros(r);
    let fp = fixed_part(state, model);
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for row in 0..model.n_rows() {
        let a = &state.a[model.subject[row]];
        let mut w = model.y[row] - fp[row];
        entries.clear();
        for &(m, zm) in &model.z[row] {
            let c = zm * state.lambda[m];
            if include_diag_term {
                w -= c * a[m];
            }
            if c == 0.0 {
                continue;
            }
            for l in 0..m {
                entries.push((tri_index(m, l), a[l] * c));
            }
        }
        for &(i, ui) in &entries {
            uw[i] += ui * w;
            for &(k, uk) in &entries {
                uu[(i, k)] += ui * uk;
            }
        }
    }
    let s = 1.0 / state.sigma2;
    (uu * s, uw * s)
}

/// `1/psi_k ~ InvGauss(sqrt(delta2 / gamma_k^2), delta2)`.
pub fn step_neg_psi(state: &mut ChainState, rng: &mut RngStream) -> Result<()> {
    let delta = state.delta2.sqrt();
    for k in 0..state.gamma.len() {
        let g = state.gamma[k].abs().max(1e-150);
        let inv = draw_inverse_gaussian(rng, delta / g, state.delta2)?;
        state.gamma_scales[k] = (1.0 / inv).clamp(f64::MIN_POSITIVE, f64::MAX);
    }
    Ok(())
}

/// `delta2 ~ G(c0 + r, d0 + sum psi / 2)`.
pub fn step_neg_delta2(state: &mut ChainState, c0: f64, rng: &mut RngStream) -> Result<()> {
    let r = state.gamma_scales.len() as f64;
    let psi_sum: f64 = state.gamma_scales.iter().sum();
    state.delta2 = draw_gamma(rng, c0 + r, state.d0 + 0.5 * psi_sum)?;
    Ok(())
}

/// `d0 ~ G(d0_shape + c0, d0_rate + delta2)`.
pub fn step_neg_d0(state: &mut ChainState, c0: f64, d0_shape: f64, d0_rate: f64, rng: &mut RngStream) -> Result<()> {
    state.d0 = draw_gamma(rng, d0_shape + c0, d0_rate + state.delta2)?;
    Ok(())
}

/// Blocked `gamma` update. Under NEG also refreshes `psi`, `delta2` and `d0`.
pub fn step_gamma(state: &mut ChainState, model: &Model, rng: &mut RngStream) -> Result<()> {
    let r = n_gamma(model.q);
    if r == 0 {
        return Ok(());
    }
    match &model.gamma_model {
        GammaModel::Neg { c0, d0_shape, d0_rate } => {
            let (mut prec, b) = gamma_regression(state, model, true);
            for k in 0..r {
                prec[(k, k)] += 1.0 / state.gamma_scales[k];
            }
            let draw = draw_mvn_precision(rng, &CholeskyFactor::new(&prec)?, &b);
            state.gamma.copy_from_slice(draw.as_slice());
            step_neg_psi(state, rng)?;
            step_neg_delta2(state, *c0, rng)?;
            step_neg_d0(state, *c0, *d0_shape, *d0_rate, rng)?;
        }
        GammaModel::Mm(mm) => {
            let coherent = model.mm_response == MmResponse::Coherent;
            let (uu, b) = gamma_regression(state, model, coherent);
            let prec = uu + &mm.precision;
            let b = b + &mm.precision_mean;
            let draw = draw_mvn_precision(rng, &CholeskyFactor::new(&prec)?, &b);
            state.gamma.copy_from_slice(draw.as_slice());
        }
    }
    Ok(())
}

/// `a_i ~ N(mu, Sigma)` with `Sigma^{-1} = I + sum v v' / sigma2`,
/// `v = Gamma' Lambda z`, one stream per subject.
pub fn step_a(state: &mut ChainState, model: &Model, rngs: &mut [RngStream]) -> Result<()> {
    if rngs.len() < model.n_subjects {
        return Err(Error::Dimension(format!(
            "{} subject streams for {} subjects",
            rngs.len(),
            model.n_subjects
        )));
    }
    let q = model.q;
    let fp = fixed_part(state, model);
    let mut prec = DMatrix::<f64>::zeros(q, q);
    let mut b = DVector::<f64>::zeros(q);
    let mut v = vec![0.0; q];
    for (i, rng) in rngs.iter_mut().enumerate().take(model.n_subjects) {
        prec.fill(0.0);
        b.fill(0.0);
        for k in 0..q {
            prec[(k, k)] = 1.0;
        }
        for &row in &model.subject_rows[i] {
            v.iter_mut().for_each(|x| *x = 0.0);
            for &(m, zm) in &model.z[row] {
                let c = zm * state.lambda[m];
                if c == 0.0 {
                    continue;
                }
                v[m] += c;
                for k in 0..m {
                    v[k] += c * state.gamma[tri_index(m, k)];
                }
            }
            let zeta = (model.y[row] - fp[row]) / state.sigma2;
            for k in 0..q {
                if v[k] == 0.0 {
                    continue;
                }
                b[k] += v[k] * zeta;
                for l in 0..q {
                    prec[(k, l)] += v[k] * v[l] / state.sigma2;
                }
            }
        }
        let draw = draw_mvn_precision(rng, &CholeskyFactor::new(&prec)?, &b);
        state.a[i].copy_from_slice(draw.as_slice());
    }
    Ok(())
}

/// `sigma2 ~ IG(a0 + (N + p_J)/2, b0 + (sum theta^2 + g beta_J'X_J'X_J beta_J)/2)`
/// where `(a0, b0)` is zero under the Jeffreys prior.
pub fn step_sigma2(state: &mut ChainState, model: &Model, rng: &mut RngStream) -> Result<()> {
    let (a0, b0) = model.prior.sigma2.shape_rate();
    let rp = random_part(state, model);
    let fp = fixed_part(state, model);
    let ss: f64 = (0..model.n_rows()).map(|r| (model.y[r] - fp[r] - rp[r]).powi(2)).sum();
    let idx = included(&state.j);
    let bj: Vec<f64> = idx.iter().map(|&k| state.beta[k]).collect();
    let qf = quad_form(&model.xtx, &idx, &bj);
    let shape = a0 + 0.5 * (model.n_rows() + idx.len()) as f64;
    let mut rate = b0 + 0.5 * (ss + state.g * qf);
    if !(rate > 0.0) {
        log::warn!("all residuals are zero; adding 1e-30 to the residual-variance rate");
        rate += 1e-30;
    }
    state.sigma2 = draw_inverse_gamma(rng, shape, rate)?;
    Ok(())
}

/// Gaussian log-likelihood of `y` at the current state.
pub fn log_likelihood(state: &ChainState, model: &Model) -> f64 {
    let rp = random_part(state, model);
    let fp = fixed_part(state, model);
    let ss: f64 = (0..model.n_rows()).map(|r| (model.y[r] - fp[r] - rp[r]).powi(2)).sum();
    let n = model.n_rows() as f64;
    -0.5 * n * (2.0 * std::f64::consts::PI * state.sigma2).ln() - 0.5 * ss / state.sigma2
}
