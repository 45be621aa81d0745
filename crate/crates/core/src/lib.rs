#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Fractional Brownian motion as a Volterra functional of Brownian motion.
//!
//! * [`kernel`]: the singular Volterra kernel, its cell integrals and comparison quantities.
//! * [`gauss`]: fBM covariance matrices, exact Gaussian sampling, Hermite polynomials.
//! * [`approx`]: the dyadic approximation ladder, its exact L² increments and decay bounds.
//! * [`malliavin`]: derivative kernels, Sobolev and capacity bounds, tail-bound constants.
//! * [`rate`]: finite-dimensional rate functions and their infima.
//! * [`mc`]: Monte Carlo decay ladders and approximation-gap diagnostics.

pub mod approx;
pub mod cli;
pub mod error;
pub mod gauss;
pub mod golden;
pub mod kernel;
pub mod malliavin;
pub mod mc;
pub mod quad;
pub mod rate;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
