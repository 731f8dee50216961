//! Brute-force oracles for the individual conditional updates. Every oracle
//! evaluates the joint density directly (likelihood times prior) rather than
//! the conjugate formulas the sampler uses.

use cholmix::cholesky::{n_gamma, tri_index};
use cholmix::dists::{ln_normal_cdf, RngStream};
use cholmix::gibbs::{
    lambda_conditional, step_a, step_beta, step_g, step_gamma, step_j, step_lambda, step_neg_d0, step_neg_delta2,
    step_neg_psi, step_phi2, step_sigma2, ChainState, GammaModel, Model,
};
use cholmix::priors::{GammaPrior, MmMethod, PriorSpec};
use nalgebra::{DMatrix, DVector};

pub const KS_DRAWS: usize = 10_000;
pub const KS_TOL: f64 = 0.02;
pub const MOMENT_DRAWS: usize = 100_000;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tol,
        }
    }

    pub fn pass(&self) -> bool {
        self.value.is_finite() && self.value <= self.tol
    }
}

fn ln_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

fn ln_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - statrs::function::gamma::ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

fn ln_inv_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - statrs::function::gamma::ln_gamma(shape) - (shape + 1.0) * x.ln() - rate / x
}

fn std_normal_cdf(x: f64) -> f64 {
    ln_normal_cdf(x).exp()
}

/// Kolmogorov-Smirnov distance between draws and a CDF.
pub fn ks(mut draws: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in draws.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// CDF from an unnormalized log density tabulated on `[lo, hi]`.
pub struct GridCdf {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridCdf {
    pub fn new(lo: f64, hi: f64, n: usize, logpdf: impl Fn(f64) -> f64) -> Self {
        let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        let lp: Vec<f64> = xs.iter().map(|&x| logpdf(x)).collect();
        let max = lp
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let p: Vec<f64> = lp
            .iter()
            .map(|&v| if v.is_finite() { (v - max).exp() } else { 0.0 })
            .collect();
        let mut cdf = vec![0.0; xs.len()];
        for i in 1..xs.len() {
            cdf[i] = cdf[i - 1] + 0.5 * (p[i] + p[i - 1]) * (xs[i] - xs[i - 1]);
        }
        let total = cdf[xs.len() - 1];
        cdf.iter_mut().for_each(|c| *c /= total);
        GridCdf { xs, cdf }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return 1.0;
        }
        let h = (self.xs[n - 1] - self.xs[0]) / (n - 1) as f64;
        let i = (((x - self.xs[0]) / h) as usize).min(n - 2);
        let t = (x - self.xs[i]) / h;
        self.cdf[i] + t * (self.cdf[i + 1] - self.cdf[i])
    }
}

/// `E[y_r]` as a function of every parameter, written independently of the
/// sampler's vectors: `x' beta + z' Lambda Gamma a_i`.
fn row_mean(model: &Model, s: &ChainState, r: usize) -> f64 {
    let q = model.q();
    let mut gamma = DMatrix::<f64>::identity(q, q);
    for m in 0..q {
        for l in 0..m {
            gamma[(m, l)] = s.gamma[tri_index(m, l)];
        }
    }
    let lam = DMatrix::from_diagonal(&DVector::from_column_slice(&s.lambda));
    let a = DVector::from_column_slice(&s.a[model.subject_of(r)]);
    let b = lam * gamma * a;
    let mut zb = 0.0;
    for &(m, zm) in model.z_row(r) {
        zb += zm * b[m];
    }
    let xb: f64 = (0..model.p()).map(|k| model.x()[(r, k)] * s.beta[k]).sum();
    xb + zb
}

fn log_lik(model: &Model, s: &ChainState) -> f64 {
    (0..model.n_rows())
        .map(|r| ln_normal_pdf(model.y()[r], row_mean(model, s, r), s.sigma2))
        .sum()
}

/// Gaussian posterior of a block that enters the mean linearly, from the
/// design obtained by perturbing each coordinate.
fn linear_block_posterior(
    model: &Model,
    s: &ChainState,
    set: impl Fn(&mut ChainState, &[f64]),
    dim: usize,
    prior_prec: &DMatrix<f64>,
    prior_prec_mean: &DVector<f64>,
    rows: &[usize],
) -> (DVector<f64>, DMatrix<f64>) {
    let mut base = s.clone();
    set(&mut base, &vec![0.0; dim]);
    let c: Vec<f64> = rows.iter().map(|&r| row_mean(model, &base, r)).collect();
    let mut d = DMatrix::<f64>::zeros(rows.len(), dim);
    for k in 0..dim {
        let mut e = vec![0.0; dim];
        e[k] = 1.0;
        let mut st = s.clone();
        set(&mut st, &e);
        for (i, &r) in rows.iter().enumerate() {
            d[(i, k)] = row_mean(model, &st, r) - c[i];
        }
    }
    let resid = DVector::from_fn(rows.len(), |i, _| model.y()[rows[i]] - c[i]);
    let prec = d.transpose() * &d / s.sigma2 + prior_prec;
    let cov = prec.clone().try_inverse().unwrap();
    let mean = &cov * (d.transpose() * resid / s.sigma2 + prior_prec_mean);
    (mean, cov)
}

fn sample_moments(draws: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let k = draws[0].len();
    let n = draws.len() as f64;
    let mut m = DVector::<f64>::zeros(k);
    for d in draws {
        for i in 0..k {
            m[i] += d[i] / n;
        }
    }
    let mut c = DMatrix::<f64>::zeros(k, k);
    for d in draws {
        for i in 0..k {
            for j in 0..k {
                c[(i, j)] += (d[i] - m[i]) * (d[j] - m[j]) / (n - 1.0);
            }
        }
    }
    (m, c)
}

/// Largest standardized error of the mean and relative error of the
/// covariance (scaled by `sqrt(C_ii C_jj)`).
fn moment_errors(draws: &[Vec<f64>], mean: &DVector<f64>, cov: &DMatrix<f64>) -> (f64, f64) {
    let (m, c) = sample_moments(draws);
    let k = mean.len();
    let mut em: f64 = 0.0;
    let mut ec: f64 = 0.0;
    for i in 0..k {
        em = em.max((m[i] - mean[i]).abs() / cov[(i, i)].sqrt());
        for j in 0..k {
            ec = ec.max((c[(i, j)] - cov[(i, j)]).abs() / (cov[(i, i)] * cov[(j, j)]).sqrt());
        }
    }
    (em, ec)
}

fn max_marginal_ks(draws: &[Vec<f64>], mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    (0..mean.len())
        .map(|k| {
            let xs: Vec<f64> = draws.iter().take(KS_DRAWS).map(|d| d[k]).collect();
            let (m, sd) = (mean[k], cov[(k, k)].sqrt());
            ks(xs, |x| std_normal_cdf((x - m) / sd))
        })
        .fold(0.0, f64::max)
}

/// Three observations from two subjects; one covariate; q = 1.
fn toy_scalar(prior: PriorSpec) -> (Model, ChainState) {
    let y = vec![0.8, -0.3, 1.5];
    let x = DMatrix::from_column_slice(3, 1, &[1.0, 0.5, -0.7]);
    let z = vec![vec![1.0], vec![0.6], vec![1.0]];
    let model = Model::from_parts(y, x, &z, vec![0, 0, 1], 2, 1, prior).unwrap();
    let mut s = ChainState::initial(&model);
    s.lambda = vec![0.9];
    s.a = vec![vec![0.4], vec![-1.1]];
    s.sigma2 = 0.7;
    s.g = 1.3;
    s.beta = vec![0.5];
    s.phi2 = vec![1.4];
    (model, s)
}

/// Six observations from two subjects on a q = 3 indicator-like design.
fn toy_vector(prior: PriorSpec) -> (Model, ChainState) {
    let y = vec![0.9, -0.4, 1.3, 0.2, -1.0, 0.7];
    let x = DMatrix::from_column_slice(6, 1, &[0.3, -0.2, 0.5, 1.0, 0.1, -0.6]);
    let z = vec![
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.5, 1.0],
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ];
    let model = Model::from_parts(y, x, &z, vec![0, 0, 0, 1, 1, 1], 2, 3, prior).unwrap();
    let mut s = ChainState::initial(&model);
    s.beta = vec![0.4];
    s.lambda = vec![0.9, 1.2, 0.7];
    s.gamma = vec![0.3, -0.5, 0.2];
    s.a = vec![vec![0.8, -0.6, 1.1], vec![-0.3, 0.9, 0.5]];
    s.sigma2 = 0.3;
    if !s.gamma_scales.is_empty() {
        s.gamma_scales = vec![0.8, 1.5, 0.4];
        s.delta2 = 2.2;
        s.d0 = 0.7;
    }
    (model, s)
}

pub fn check_beta() -> Vec<Check> {
    let (model, s0) = toy_scalar(PriorSpec::default());
    let xtx: f64 = model.x().iter().map(|v| v * v).sum();
    let logpdf = |b: f64| {
        let mut s = s0.clone();
        s.beta = vec![b];
        log_lik(&model, &s) + ln_normal_pdf(b, 0.0, s0.sigma2 / (s0.g * xtx))
    };
    let grid = GridCdf::new(-6.0, 6.0, 20_000, logpdf);
    let mut rng = RngStream::new(401);
    let draws: Vec<f64> = (0..KS_DRAWS)
        .map(|_| {
            let mut s = s0.clone();
            step_beta(&mut s, &model, &mut rng).unwrap();
            s.beta[0]
        })
        .collect();
    vec![Check::new("step_beta KS vs grid", ks(draws, |x| grid.eval(x)), KS_TOL)]
}

pub fn check_g() -> Vec<Check> {
    let (model, s0) = toy_scalar(PriorSpec::default());
    let xtx: f64 = model.x().iter().map(|v| v * v).sum();
    let (shape, rate) = (model.prior().beta.g_shape, model.g_rate());
    let logpdf = |g: f64| {
        if g <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ln_gamma_pdf(g, shape, rate) + ln_normal_pdf(s0.beta[0], 0.0, s0.sigma2 / (g * xtx))
    };
    let grid = GridCdf::new(0.0, 15.0, 60_000, logpdf);
    let mut rng = RngStream::new(402);
    let draws: Vec<f64> = (0..KS_DRAWS)
        .map(|_| {
            let mut s = s0.clone();
            step_g(&mut s, &model, &mut rng).unwrap();
            s.g
        })
        .collect();
    vec![Check::new("step_g KS vs grid", ks(draws, |x| grid.eval(x)), KS_TOL)]
}

/// Exhaustive enumeration of the four models of a two-covariate toy.
/// Returns `(sampled, enumerated, enumerated with (1 + g) in the determinant)`.
pub fn inclusion_enumeration(sweeps: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let y = vec![1.2, -0.4, 0.9, 2.1, -1.3];
    let x = DMatrix::from_row_slice(5, 2, &[1.0, 0.2, -0.5, 1.1, 0.8, -0.3, 1.4, 0.9, -1.0, 0.4]);
    let z = vec![vec![1.0]; 5];
    let model = Model::from_parts(
        y.clone(),
        x.clone(),
        &z,
        vec![0, 1, 2, 3, 4],
        5,
        1,
        PriorSpec::default(),
    )
    .unwrap();
    let mut s = ChainState::initial(&model);
    s.lambda = vec![0.5];
    s.a = vec![vec![0.3], vec![-0.2], vec![0.1], vec![0.6], vec![-0.4]];
    s.sigma2 = 0.8;
    s.g = 0.3;
    let phi = DVector::from_fn(5, |r, _| y[r] - 0.5 * s.a[r][0]);
    let p0 = model.prior().beta.p0;
    let (g, sigma2) = (s.g, s.sigma2);
    let enumerate = |det_base_one_over_g: bool| {
        let mut post = [0.0; 4];
        for (code, w) in post.iter_mut().enumerate() {
            let idx: Vec<usize> = (0..2).filter(|k| code >> k & 1 == 1).collect();
            let mut cov = DMatrix::<f64>::identity(5, 5);
            if !idx.is_empty() {
                let xj = DMatrix::from_fn(5, idx.len(), |r, c| x[(r, idx[c])]);
                let proj = &xj * (xj.transpose() * &xj).try_inverse().unwrap() * xj.transpose();
                cov += proj / g;
            }
            let cov = cov * sigma2;
            let ln_det = if det_base_one_over_g {
                cov.determinant().ln()
            } else {
                // Same quadratic form, determinant factor (1 + g) per included column.
                5.0 * sigma2.ln() + idx.len() as f64 * (1.0 + g).ln()
            };
            let quad = phi.dot(&(cov.clone().try_inverse().unwrap() * &phi));
            let k = idx.len() as f64;
            *w = (-0.5 * ln_det - 0.5 * quad).exp() * p0.powf(k) * (1.0 - p0).powf(2.0 - k);
        }
        let total: f64 = post.iter().sum();
        vec![(post[1] + post[3]) / total, (post[2] + post[3]) / total]
    };
    let mut rng = RngStream::new(403);
    let mut freq = vec![0.0; 2];
    for _ in 0..sweeps {
        step_j(&mut s, &model, &mut rng).unwrap();
        for k in 0..2 {
            if s.j[k] {
                freq[k] += 1.0 / sweeps as f64;
            }
        }
    }
    (freq, enumerate(true), enumerate(false))
}

pub fn check_j() -> Vec<Check> {
    let (freq, exact, alt) = inclusion_enumeration(MOMENT_DRAWS);
    let err = (0..2).map(|k| (freq[k] - exact[k]).abs()).fold(0.0, f64::max);
    let alt_gap = (0..2).map(|k| (alt[k] - exact[k]).abs()).fold(0.0, f64::max);
    vec![
        Check::new("step_J inclusion vs enumeration", err, 0.02),
        // The (1 + g) determinant reading must be distinguishable here.
        Check::new("step_J (1+g) variant rejected", 0.02 / alt_gap.max(1e-300), 1.0),
    ]
}

pub fn check_lambda() -> Vec<Check> {
    let mut prior = PriorSpec::default();
    prior.lambda.p_zero = 0.5;
    let (model, s0) = toy_scalar(prior);
    let p = 0.5;
    let phi2 = s0.phi2[0];
    let lik = |lam: f64| {
        let mut s = s0.clone();
        s.lambda = vec![lam];
        log_lik(&model, &s)
    };
    let slab = |lam: f64| lik(lam) + ln_normal_pdf(lam, 0.0, phi2) + std::f64::consts::LN_2;
    let grid = GridCdf::new(0.0, 8.0, 40_000, slab);
    // Slab mass by trapezoid on the same grid, relative to the spike.
    let ref_ll = lik(0.0);
    let n = 40_000;
    let h = 8.0 / n as f64;
    let mut mass = 0.0;
    for i in 0..=n {
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        mass += w * h * (slab(i as f64 * h) - ref_ll).exp();
    }
    let p_zero_exact = p / (p + (1.0 - p) * mass);

    // Sufficient statistics for the closed form.
    let fp: Vec<f64> = (0..3).map(|r| model.x()[(r, 0)] * s0.beta[0]).collect();
    let (mut a, mut b) = (0.0, 0.0);
    for r in 0..3 {
        let t = model.z_row(r)[0].1 * s0.a[model.subject_of(r)][0];
        a += t * t;
        b += t * (model.y()[r] - fp[r]);
    }
    let cond = lambda_conditional(a / s0.sigma2, b / s0.sigma2, phi2, p);

    let mut rng = RngStream::new(404);
    let mut zeros = 0usize;
    let mut slab_draws = Vec::new();
    for _ in 0..MOMENT_DRAWS {
        let mut s = s0.clone();
        step_lambda(&mut s, &model, &mut rng).unwrap();
        if s.lambda[0] == 0.0 {
            zeros += 1;
        } else if slab_draws.len() < KS_DRAWS {
            slab_draws.push(s.lambda[0]);
        }
    }
    vec![
        Check::new(
            "step_lambda zero prob (closed form) vs quadrature",
            (cond.p_zero - p_zero_exact).abs(),
            0.01,
        ),
        Check::new(
            "step_lambda zero frequency vs quadrature",
            (zeros as f64 / MOMENT_DRAWS as f64 - p_zero_exact).abs(),
            0.02,
        ),
        Check::new("step_lambda slab KS vs grid", ks(slab_draws, |x| grid.eval(x)), KS_TOL),
    ]
}

pub fn check_phi2() -> Vec<Check> {
    let (model, mut s0) = toy_scalar(PriorSpec::default());
    let (a0, b0) = (model.prior().lambda.phi_shape, model.prior().lambda.phi_rate);
    let mut out = Vec::new();
    for lam in [0.8, 0.0] {
        s0.lambda = vec![lam];
        // Work on log(phi2) because the prior is heavy-tailed.
        let logpdf = |u: f64| {
            let v = u.exp();
            let slab = if lam > 0.0 { ln_normal_pdf(lam, 0.0, v) } else { 0.0 };
            ln_inv_gamma_pdf(v, a0, b0) + slab + u
        };
        let grid = GridCdf::new(-15.0, 25.0, 80_000, logpdf);
        let mut rng = RngStream::new(405);
        let draws: Vec<f64> = (0..KS_DRAWS)
            .map(|_| {
                let mut s = s0.clone();
                step_phi2(&mut s, &model, &mut rng).unwrap();
                s.phi2[0].ln()
            })
            .collect();
        out.push(Check::new(
            format!("step_phi2 (lambda = {lam}) KS vs grid"),
            ks(draws, |x| grid.eval(x)),
            KS_TOL,
        ));
    }
    out
}

fn gamma_block(
    model: &Model,
    s0: &ChainState,
    prior_prec: DMatrix<f64>,
    prior_pm: DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let rows: Vec<usize> = (0..model.n_rows()).collect();
    linear_block_posterior(
        model,
        s0,
        |s, g| s.gamma.copy_from_slice(g),
        n_gamma(model.q()),
        &prior_prec,
        &prior_pm,
        &rows,
    )
}

pub fn check_gamma_neg() -> Vec<Check> {
    let (model, s0) = toy_vector(PriorSpec::default());
    let r = n_gamma(3);
    let prior_prec = DMatrix::from_diagonal(&DVector::from_iterator(r, s0.gamma_scales.iter().map(|p| 1.0 / p)));
    let (mean, cov) = gamma_block(&model, &s0, prior_prec, DVector::zeros(r));
    let mut rng = RngStream::new(406);
    let draws: Vec<Vec<f64>> = (0..MOMENT_DRAWS)
        .map(|_| {
            let mut s = s0.clone();
            step_gamma(&mut s, &model, &mut rng).unwrap();
            s.gamma
        })
        .collect();
    let (em, ec) = moment_errors(&draws, &mean, &cov);
    let mut out = vec![
        Check::new("step_gamma (NEG) mean vs dense oracle", em, 0.02),
        Check::new("step_gamma (NEG) covariance vs dense oracle", ec, 0.02),
        Check::new(
            "step_gamma (NEG) marginal KS",
            max_marginal_ks(&draws, &mean, &cov),
            KS_TOL,
        ),
    ];

    // Scale updates against the joint restricted to each coordinate.
    let (c0, d0_shape, d0_rate) = match model.gamma_model() {
        GammaModel::Neg { c0, d0_shape, d0_rate } => (*c0, *d0_shape, *d0_rate),
        _ => unreachable!(),
    };
    let g0 = s0.gamma[1];
    let psi_logpdf = |u: f64| {
        let v = u.exp();
        ln_normal_pdf(g0, 0.0, v) + (0.5 * s0.delta2).ln() - 0.5 * s0.delta2 * v + u
    };
    let grid = GridCdf::new(-20.0, 10.0, 60_000, psi_logpdf);
    let mut rng = RngStream::new(407);
    let draws: Vec<f64> = (0..KS_DRAWS)
        .map(|_| {
            let mut s = s0.clone();
            step_neg_psi(&mut s, &mut rng).unwrap();
            s.gamma_scales[1].ln()
        })
        .collect();
    out.push(Check::new(
        "step_gamma (NEG) psi KS vs grid",
        ks(draws, |x| grid.eval(x)),
        KS_TOL,
    ));

    let psi = s0.gamma_scales.clone();
    let delta_logpdf = |d: f64| {
        if d <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ln_gamma_pdf(d, c0, s0.d0) + psi.iter().map(|&p| (0.5 * d).ln() - 0.5 * d * p).sum::<f64>()
    };
    let grid = GridCdf::new(0.0, 40.0, 80_000, delta_logpdf);
    let draws: Vec<f64> = (0..MOMENT_DRAWS)
        .map(|_| {
            let mut s = s0.clone();
            step_neg_delta2(&mut s, c0, &mut rng).unwrap();
            s.delta2
        })
        .collect();
    let n = draws.len() as f64;
    let m = draws.iter().sum::<f64>() / n;
    let v = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let (shape, rate) = (c0 + r as f64, s0.d0 + 0.5 * psi.iter().sum::<f64>());
    out.push(Check::new(
        "step_gamma (NEG) delta2 mean rel. error",
        (m / (shape / rate) - 1.0).abs(),
        0.01,
    ));
    out.push(Check::new(
        "step_gamma (NEG) delta2 variance rel. error",
        (v / (shape / (rate * rate)) - 1.0).abs(),
        0.02,
    ));
    out.push(Check::new(
        "step_gamma (NEG) delta2 KS vs grid",
        ks(draws.into_iter().take(KS_DRAWS).collect(), |x| grid.eval(x)),
        KS_TOL,
    ));

    let d0_logpdf = |d: f64| {
        if d <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ln_gamma_pdf(d, d0_shape, d0_rate) + ln_gamma_pdf(s0.delta2, c0, d)
    };
    let grid = GridCdf::new(0.0, 20.0, 80_000, d0_logpdf);
    let draws: Vec<f64> = (0..KS_DRAWS)
        .map(|_| {
            let mut s = s0.clone();
            step_neg_d0(&mut s, c0, d0_shape, d0_rate, &mut rng).unwrap();
            s.d0
        })
        .collect();
    out.push(Check::new(
        "step_gamma (NEG) d0 KS vs grid",
        ks(draws, |x| grid.eval(x)),
        KS_TOL,
    ));
    out
}

pub fn check_gamma_mm() -> Vec<Check> {
    let prior = PriorSpec::with_gamma(GammaPrior::Mm {
        u: 0.1,
        v: 0.09,
        method: MmMethod::ClosedForm,
    });
    let (model, s0) = toy_vector(prior);
    let mm = match model.gamma_model() {
        GammaModel::Mm(mm) => mm.clone(),
        _ => unreachable!(),
    };
    let (mean, cov) = gamma_block(&model, &s0, mm.precision.clone(), mm.precision_mean.clone());
    let mut rng = RngStream::new(408);
    let draws: Vec<Vec<f64>> = (0..MOMENT_DRAWS)
        .map(|_| {
            let mut s = s0.clone();
            step_gamma(&mut s, &model, &mut rng).unwrap();
            s.gamma
        })
        .collect();
    let (em, ec) = moment_errors(&draws, &mean, &cov);
    let mut out = vec![
        Check::new("step_gamma (MM) mean vs dense oracle", em, 0.02),
        Check::new("step_gamma (MM) covariance vs dense oracle", ec, 0.02),
        Check::new(
            "step_gamma (MM) marginal KS",
            max_marginal_ks(&draws, &mean, &cov),
            KS_TOL,
        ),
    ];

    // Flat prior and noiseless data: the draw is the least-squares solution.
    let mut flat = mm.clone();
    flat.precision = DMatrix::zeros(3, 3);
    flat.precision_mean = DVector::zeros(3);
    let truth = [0.45, -0.7, 0.25];
    let (m2, mut s1) = toy_vector(PriorSpec::with_gamma(GammaPrior::Mm {
        u: 0.1,
        v: 0.09,
        method: MmMethod::ClosedForm,
    }));
    let mut m2 = m2.with_gamma_model(GammaModel::Mm(flat)).unwrap();
    s1.gamma = truth.to_vec();
    let y: Vec<f64> = (0..m2.n_rows()).map(|r| row_mean(&m2, &s1, r)).collect();
    m2.y_mut().copy_from_slice(&y);
    s1.gamma = vec![0.0; 3];
    s1.sigma2 = 1e-24;
    step_gamma(&mut s1, &m2, &mut rng).unwrap();
    let err = s1
        .gamma
        .iter()
        .zip(&truth)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.push(Check::new(
        "step_gamma (MM) flat prior recovers least squares",
        err,
        1e-6,
    ));
    out
}

pub fn check_a() -> Vec<Check> {
    let (model, s0) = toy_vector(PriorSpec::default());
    let rows: Vec<usize> = (0..model.n_rows()).filter(|&r| model.subject_of(r) == 0).collect();
    let (mean, cov) = linear_block_posterior(
        &model,
        &s0,
        |s, a| s.a[0].copy_from_slice(a),
        3,
        &DMatrix::identity(3, 3),
        &DVector::zeros(3),
        &rows,
    );
    let mut rngs = vec![RngStream::new(409), RngStream::new(410)];
    let draws: Vec<Vec<f64>> = (0..MOMENT_DRAWS)
        .map(|_| {
            let mut s = s0.clone();
            step_a(&mut s, &model, &mut rngs).unwrap();
            s.a[0].clone()
        })
        .collect();
    let (em, ec) = moment_errors(&draws, &mean, &cov);
    let max_eig = cov.clone().symmetric_eigen().eigenvalues.max();
    vec![
        Check::new("step_a mean vs dense oracle", em, 0.02),
        Check::new("step_a covariance vs dense oracle", ec, 0.02),
        Check::new("step_a marginal KS", max_marginal_ks(&draws, &mean, &cov), KS_TOL),
        Check::new("step_a posterior covariance eigenvalues <= 1", max_eig, 1.0),
    ]
}

pub fn check_sigma2() -> Vec<Check> {
    let (model, s0) = toy_scalar(PriorSpec::default());
    let xtx: f64 = model.x().iter().map(|v| v * v).sum();
    // Jeffreys prior, likelihood, and the g-prior on beta all involve sigma2.
    let logpdf = |u: f64| {
        let v = u.exp();
        let mut s = s0.clone();
        s.sigma2 = v;
        log_lik(&model, &s) + ln_normal_pdf(s0.beta[0], 0.0, v / (s0.g * xtx)) - v.ln() + u
    };
    let grid = GridCdf::new(-12.0, 12.0, 60_000, logpdf);
    let mut rng = RngStream::new(411);
    let draws: Vec<f64> = (0..KS_DRAWS)
        .map(|_| {
            let mut s = s0.clone();
            step_sigma2(&mut s, &model, &mut rng).unwrap();
            s.sigma2.ln()
        })
        .collect();
    vec![Check::new(
        "step_sigma2 KS vs grid",
        ks(draws, |x| grid.eval(x)),
        KS_TOL,
    )]
}

pub fn all_checks() -> Vec<Check> {
    let mut out = Vec::new();
    out.extend(check_beta());
    out.extend(check_g());
    out.extend(check_j());
    out.extend(check_lambda());
    out.extend(check_phi2());
    out.extend(check_gamma_neg());
    out.extend(check_gamma_mm());
    out.extend(check_a());
    out.extend(check_sigma2());
    out
}
