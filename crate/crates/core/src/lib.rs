//! Simulation and numerical verification for the randomized Euler product
//! model of the zeta function on the critical line.
//!
//! * [`primes`]: sieved prime tables split into dyadic log-scales, prime sums.
//! * [`model`]: phase sampling (uniform and tilted) and field evaluation.
//! * [`analytic`]: variances, covariances, Bessel-form cumulant generating
//!   functions, tilted moments, bound evaluators and scaling constants.
//! * [`walks`]: branching random walk maxima, ballot and barrier
//!   probabilities for Gaussian walks.
//! * [`exceed`]: exceedance counts with and without barriers and the moment
//!   diagnostics built on them.

// Comparisons are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod bessel;
pub mod error;
pub mod exceed;
pub mod model;
pub mod primes;
pub mod quad;
pub mod report;
pub mod rng;
pub mod stats;
pub mod walks;

pub use error::{Error, Result};
