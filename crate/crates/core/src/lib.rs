//! Bayesian multivariate-longitudinal linear mixed models with priors on the
//! modified Cholesky factors of the random-effects covariance.

// Index loops read closer to the formulas in the numeric kernels, and
// `!(x > 0.0)` doubles as a NaN check.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cholesky;
pub mod commands;
pub mod data;
pub mod diagnostics;
pub mod dists;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod linalg;
pub mod priors;
pub mod simulation;

pub use error::{Error, Result};
