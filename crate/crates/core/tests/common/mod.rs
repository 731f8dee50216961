//! Shared helpers for the integration tests: prior simulation, data
//! simulation from a parameter state, and the successive-conditional check.

#![allow(dead_code, clippy::needless_range_loop)]

pub mod oracles;

use cholmix::cholesky::{n_gamma, tri_index};
use cholmix::diagnostics::effective_sample_size;
use cholmix::dists::{draw_gamma, draw_inverse_gamma, draw_mvn, draw_truncated_normal_pos, RngStream};
use cholmix::gibbs::{gibbs_iteration, ChainRng, ChainState, GammaModel, Model};
use cholmix::priors::{GammaPrior, PriorSpec, Sigma2Prior};
use nalgebra::{DMatrix, DVector};

/// Draws every parameter, latent effects included, from the joint prior.
pub fn draw_from_prior(model: &Model, rng: &mut RngStream) -> ChainState {
    let prior = model.prior();
    let mut s = ChainState::initial(model);
    let (p, q) = (model.p(), model.q());
    s.p0 = prior.beta.p0;
    s.j = (0..p).map(|_| rng.bernoulli(s.p0)).collect();
    s.g = draw_gamma(rng, prior.beta.g_shape, model.g_rate()).unwrap();
    let (a0, b0) = prior.sigma2.shape_rate();
    s.sigma2 = draw_inverse_gamma(rng, a0, b0).unwrap();
    s.beta = vec![0.0; p];
    let idx: Vec<usize> = (0..p).filter(|&k| s.j[k]).collect();
    if !idx.is_empty() {
        let xtx = model.x().transpose() * model.x();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| xtx[(idx[a], idx[b])]);
        let cov = sub.try_inverse().unwrap() * (s.sigma2 / s.g);
        let cov = (&cov + cov.transpose()) * 0.5;
        let b = draw_mvn(rng, &DVector::zeros(idx.len()), &cov).unwrap();
        for (a, &k) in idx.iter().enumerate() {
            s.beta[k] = b[a];
        }
    }
    for l in 0..q {
        s.phi2[l] = draw_inverse_gamma(rng, prior.lambda.phi_shape, prior.lambda.phi_rate).unwrap();
        s.lambda[l] = if rng.bernoulli(prior.lambda.p_zero) {
            0.0
        } else {
            draw_truncated_normal_pos(rng, 0.0, s.phi2[l]).unwrap()
        };
    }
    match model.gamma_model() {
        GammaModel::Neg { c0, d0_shape, d0_rate } => {
            s.d0 = draw_gamma(rng, *d0_shape, *d0_rate).unwrap();
            s.delta2 = draw_gamma(rng, *c0, s.d0).unwrap();
            for k in 0..n_gamma(q) {
                s.gamma_scales[k] = 2.0 / s.delta2 * rng.standard_exponential();
                s.gamma[k] = s.gamma_scales[k].sqrt() * rng.standard_normal();
            }
        }
        GammaModel::Mm(mm) => s.gamma = mm.sample(rng).unwrap(),
    }
    for a in s.a.iter_mut() {
        for v in a.iter_mut() {
            *v = rng.standard_normal();
        }
    }
    s
}

/// `y = x' beta + z' Lambda Gamma a_i + eps` at the given state.
pub fn simulate_y(model: &Model, s: &ChainState, rng: &mut RngStream) -> Vec<f64> {
    let q = model.q();
    (0..model.n_rows())
        .map(|r| {
            let a = &s.a[model.subject_of(r)];
            let mut mean: f64 = (0..model.p()).map(|k| model.x()[(r, k)] * s.beta[k]).sum();
            for &(m, zm) in model.z_row(r) {
                let mut c = a[m];
                for l in 0..m {
                    c += s.gamma[tri_index(m, l)] * a[l];
                }
                mean += zm * s.lambda[m] * c;
            }
            let _ = q;
            mean + s.sigma2.sqrt() * rng.standard_normal()
        })
        .collect()
}

/// A q = 3, p = 2 toy with four subjects, each seen once per effect, and a
/// proper light-tailed prior.
pub fn joint_test_model(gamma: GammaPrior) -> Model {
    let mut prior = PriorSpec::with_gamma(gamma);
    prior.sigma2 = Sigma2Prior::InverseGamma { shape: 6.0, rate: 5.0 };
    prior.beta.g_shape = 5.0;
    prior.beta.g_rate = Some(5.0);
    prior.lambda.phi_shape = 4.0;
    prior.lambda.phi_rate = 4.0;
    if let GammaPrior::Neg { .. } = prior.gamma {
        prior.gamma = GammaPrior::Neg {
            c0: 6.0,
            d0_shape: 6.0,
            d0_rate: 6.0,
        };
    }
    let (n_subj, q, p) = (4, 3, 2);
    let mut rng = RngStream::new(99);
    let n = n_subj * q;
    let x = DMatrix::from_fn(n, p, |_, _| rng.standard_normal());
    let z: Vec<Vec<f64>> = (0..n)
        .map(|r| (0..q).map(|l| if r % q == l { 1.0 } else { 0.0 }).collect())
        .collect();
    let subject: Vec<usize> = (0..n).map(|r| r / q).collect();
    Model::from_parts(vec![0.0; n], x, &z, subject, n_subj, q, prior).unwrap()
}

/// Scalar functionals compared by the joint test: first and second moments
/// of `beta`, `lambda`, `gamma` and `sigma2`.
pub fn joint_stats(s: &ChainState) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut push = |name: String, v: f64| {
        out.push((name.clone(), v));
        out.push((format!("{name}^2"), v * v));
    };
    for (k, &b) in s.beta.iter().enumerate() {
        push(format!("beta_{}", k + 1), b);
    }
    for (k, &l) in s.lambda.iter().enumerate() {
        push(format!("lambda_{}", k + 1), l);
    }
    for (k, &g) in s.gamma.iter().enumerate() {
        push(format!("gamma_{}", k + 1), g);
    }
    push("sigma2".into(), s.sigma2);
    out
}

/// Successive-conditional simulation against independent prior draws.
/// Returns `(name, z)` per functional.
pub fn joint_z_scores(mut model: Model, cycles: usize, seed: u64) -> Vec<(String, f64)> {
    let mut prior_rng = RngStream::new(seed).split(1);
    let prior_stats: Vec<Vec<(String, f64)>> = (0..cycles)
        .map(|_| joint_stats(&draw_from_prior(&model, &mut prior_rng)))
        .collect();

    let mut data_rng = RngStream::new(seed).split(2);
    let mut chain_rng = ChainRng::new(seed, 3, model.n_subjects());
    let mut s = draw_from_prior(&model, &mut RngStream::new(seed).split(4));
    let mut sc_stats = Vec::with_capacity(cycles);
    for _ in 0..cycles {
        let y = simulate_y(&model, &s, &mut data_rng);
        model.y_mut().copy_from_slice(&y);
        gibbs_iteration(&mut s, &model, &mut chain_rng).unwrap();
        sc_stats.push(joint_stats(&s));
    }
    let k = prior_stats[0].len();
    (0..k)
        .map(|i| {
            let a: Vec<f64> = prior_stats.iter().map(|v| v[i].1).collect();
            let b: Vec<f64> = sc_stats.iter().map(|v| v[i].1).collect();
            let n = a.len() as f64;
            let ma = a.iter().sum::<f64>() / n;
            let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / (n - 1.0) / n;
            let nb = b.len() as f64;
            let mb = b.iter().sum::<f64>() / nb;
            let ess = effective_sample_size(&b).unwrap();
            let vb = b.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / (nb - 1.0) / ess;
            (prior_stats[0][i].0.clone(), (mb - ma) / (va + vb).sqrt())
        })
        .collect()
}
