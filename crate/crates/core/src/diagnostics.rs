//! Convergence and mixing checks for scalar traces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest trace the diagnostics accept.
pub const MIN_TRACE: usize = 100;
/// Batches used by the batch-means spectral estimate.
pub const N_BATCHES: usize = 20;
/// `|z|` above this raises a Geweke flag.
pub const GEWEKE_THRESHOLD: f64 = 3.5;
/// Effective sample sizes below this raise a mixing flag.
pub const LOW_ESS: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceVector {
    pub label: String,
    pub values: Vec<f64>,
}

impl TraceVector {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        TraceVector {
            label: label.into(),
            values,
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Batch-means estimate of `Var(mean(xs))`: the spectral density at zero
/// divided by the length. Uses `min(n_batches, len)` contiguous batches.
pub fn batch_means_variance(xs: &[f64], n_batches: usize) -> f64 {
    let n = xs.len();
    let nb = n_batches.min(n);
    if nb < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let mut s = 0.0;
    for k in 0..nb {
        let (lo, hi) = (k * n / nb, (k + 1) * n / nb);
        let bm = mean(&xs[lo..hi]);
        s += (hi - lo) as f64 * (bm - m).powi(2);
    }
    s / (nb - 1) as f64 / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geweke {
    pub z: f64,
    /// Both segments were constant; `z` is reported as 0.
    pub zero_variance: bool,
}

/// Geweke's comparison of the first `frac_a` and last `frac_b` of a trace.
pub fn geweke_z(trace: &[f64], frac_a: f64, frac_b: f64) -> Result<Geweke> {
    let n = trace.len();
    if n < MIN_TRACE {
        return Err(Error::TooShort { len: n, min: MIN_TRACE });
    }
    if !(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0) {
        return Err(Error::Config(format!(
            "segment fractions {frac_a} and {frac_b} must be positive and sum to at most 1"
        )));
    }
    let na = ((frac_a * n as f64).floor() as usize).max(2);
    let nb = ((frac_b * n as f64).floor() as usize).max(2);
    let a = &trace[..na];
    let b = &trace[n - nb..];
    let var = batch_means_variance(a, N_BATCHES) + batch_means_variance(b, N_BATCHES);
    let diff = mean(a) - mean(b);
    // Relative guard so that affine images of a constant trace also count.
    let scale = trace.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    if var <= (1e-14 * scale).powi(2) {
        return Ok(Geweke {
            z: 0.0,
            zero_variance: true,
        });
    }
    Ok(Geweke {
        z: diff / var.sqrt(),
        zero_variance: false,
    })
}

/// Lag-`k` autocorrelations for `k = 0..`, computed lazily.
fn autocorrelation(xs: &[f64], m: f64, c0: f64, k: usize) -> f64 {
    let n = xs.len();
    let mut s = 0.0;
    for t in 0..n - k {
        s += (xs[t] - m) * (xs[t + k] - m);
    }
    s / n as f64 / c0
}

/// Effective sample size with Geyer's initial positive sequence, clamped to
/// `[1, n]`. A constant trace has ESS `n`.
pub fn effective_sample_size(trace: &[f64]) -> Result<f64> {
    let n = trace.len();
    if n < MIN_TRACE {
        return Err(Error::TooShort { len: n, min: MIN_TRACE });
    }
    let m = mean(trace);
    let c0 = trace.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
    let scale = trace.iter().fold(0.0_f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
    if c0 <= (1e-14 * scale).powi(2) {
        return Ok(n as f64);
    }
    let mut tau = -1.0;
    let mut k = 0;
    while k + 1 < n {
        let pair = autocorrelation(trace, m, c0, k) + autocorrelation(trace, m, c0, k + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 2;
    }
    let ess = n as f64 / tau.max(f64::MIN_POSITIVE);
    Ok(ess.clamp(1.0, n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub parameter: String,
    pub chain: usize,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub ess: f64,
    pub geweke_z: f64,
    pub zero_variance: bool,
    /// `ok`, or `+`-joined reasons: `geweke`, `low_ess`.
    pub flag: String,
}

impl DiagnosticRow {
    pub fn is_flagged(&self) -> bool {
        self.flag != "ok"
    }
}

pub fn diagnose_trace(trace: &TraceVector, chain: usize) -> Result<DiagnosticRow> {
    let xs = &trace.values;
    let g = geweke_z(xs, 0.1, 0.5)?;
    let ess = effective_sample_size(xs)?;
    let m = mean(xs);
    let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
    let mut reasons = Vec::new();
    if g.z.abs() > GEWEKE_THRESHOLD {
        reasons.push("geweke");
    }
    if !g.zero_variance && ess < LOW_ESS {
        reasons.push("low_ess");
    }
    Ok(DiagnosticRow {
        parameter: trace.label.clone(),
        chain,
        n: xs.len(),
        mean: m,
        sd,
        ess,
        geweke_z: g.z,
        zero_variance: g.zero_variance,
        flag: if reasons.is_empty() {
            "ok".into()
        } else {
            reasons.join("+")
        },
    })
}
