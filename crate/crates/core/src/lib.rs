//! Rank selection for spiked Wigner matrices.
//!
//! An observation `X = sum_i lambda_i u_i u_i^T + noise` is reduced to its
//! descending spectrum, and the number of spikes is estimated with
//! generalised AIC scores (penalty `gamma` per parameter), a soft
//! minimiser of AIC, or the scree-plot rule.
//!
//! * [`ensembles`] samples GOE, Rademacher-Wigner and Toeplitz-Hankel noise
//!   and assembles spiked observations.
//! * [`spectral`] wraps the symmetric eigensolver and provides the
//!   semicircle-law analytics (`psi`, `lambda_threshold`, quantiles).
//! * [`criteria`] holds the score vectors, noise-variance estimators and
//!   the rank estimators.
//! * [`montecarlo`] runs reproducible, parallel replication experiments.
//! * [`cli`] is the command-line front end.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod criteria;
pub mod ensembles;
mod error;
pub mod montecarlo;
pub mod spectral;

pub use error::{Error, Result};

/// Dense real matrix type used throughout the crate.
pub type Matrix = faer::Mat<f64>;
