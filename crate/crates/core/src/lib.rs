//! Surprisal-based anomaly detection.
//!
//! Observations are scored by their surprisal `s = -log f(y)` under an
//! assumed model and flagged when the probability of a surprisal at least as
//! large falls below `α`. That probability can come from the assumed model,
//! from the empirical distribution of the surprisals, or from a Generalized
//! Pareto fit to their upper tail.
//!
//! ```
//! use surprisal::{compute_surprisals, flag_anomalies, DistributionModel, Points, TailEstimator};
//!
//! let model: DistributionModel = "normal(mu=0,sigma=1)".parse().unwrap();
//! let data = Points::scalars(vec![0.1, -0.4, 5.0, 0.7]);
//! let sample = compute_surprisals(&model, &data).unwrap();
//! let est = TailEstimator::Assumed(model).estimate(&sample.surprisals).unwrap();
//! let report = flag_anomalies(&est, 0.01).unwrap();
//! assert_eq!(report.flagged, vec![2]);
//! ```

// `!(x > 0.0)` also rejects NaN; published coefficients keep all digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod apps;
pub mod assumed;
pub mod conditional;
pub mod distributions;
pub mod empirical;
pub mod error;
pub mod evt;
pub mod gpd;
mod optim;
pub mod rng;
pub mod simulation;
pub mod surprisal;

pub use distributions::{DistributionModel, ModelSpec, Points};
pub use empirical::{dkw_epsilon, DkwBand, EcdfTail};
pub use error::{Error, Result};
pub use gpd::{fit_gpd, gpd_sample, select_exceedances, GpdFit};
pub use surprisal::{
    compute_surprisals, flag_anomalies, group_filter, AnomalyReport, SurprisalSample,
    TailEstimate, TailEstimator, TailMethod,
};
