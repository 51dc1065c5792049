//! Models where each observation has its own conditional distribution.
//!
//! Surprisals computed this way are valid for fixed covariates (time index,
//! innings count); they say nothing about joint variation of the covariates.

pub mod binomial_smooth;
pub mod hampel;

pub use binomial_smooth::{binomial_surprisals, fit_binomial_smooth, BinomialSmoothFit};
pub use hampel::{hampel_alpha_from_tau, hampel_surprisals, hampel_tau_from_alpha, HampelModel, HampelSeries};
