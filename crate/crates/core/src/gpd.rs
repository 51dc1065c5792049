//! Peaks-over-threshold tail estimation with the Generalized Pareto
//! Distribution.
//!
//! The largest `β` fraction of surprisals is modelled as `u + X` with
//! `X ~ GPD(σ, ξ)` and `u` the empirical `1-β` quantile. Tail probabilities
//! are then `β [1 - P(s - u)]` above the threshold and `β` below it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optim::NelderMead;
use crate::rng::seeded;

/// Below this |ξ| the exponential limit form is used.
pub const XI_TOL: f64 = 1e-6;
pub const MIN_EXCEEDANCES: usize = 20;
pub const DEFAULT_BETA: f64 = 0.1;
const XI_BOUNDS: (f64, f64) = (-1.0, 10.0);

/// A fitted tail. Serializes as `{u, sigma, xi, n_exceed, beta, loglik}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdFit {
    #[serde(rename = "u")]
    pub threshold_u: f64,
    #[serde(rename = "sigma")]
    pub scale_sigma: f64,
    #[serde(rename = "xi")]
    pub shape_xi: f64,
    pub n_exceed: usize,
    pub beta: f64,
    pub loglik: f64,
}

/// Threshold and the (finite) excesses above it.
#[derive(Debug, Clone, PartialEq)]
pub struct Exceedances {
    pub threshold: f64,
    pub values: Vec<f64>,
    pub beta: f64,
}

/// Takes the top `⌈βn⌉` order statistics: `u` is the `⌈(1-β)n⌉`-th smallest
/// surprisal and the excesses are `s - u` for every `s > u`. Infinite
/// surprisals are left out of the excesses.
pub fn select_exceedances(surprisals: &[f64], beta: f64) -> Result<Exceedances> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid(format!("beta must lie in (0, 1), got {beta}")));
    }
    if surprisals.iter().any(|s| s.is_nan()) {
        return Err(invalid("surprisal is NaN"));
    }
    let n = surprisals.len();
    let k = exceedance_count(n, beta);
    if k < MIN_EXCEEDANCES || k >= n {
        return Err(Error::InsufficientData {
            what: "GPD exceedances (beta * n)",
            needed: MIN_EXCEEDANCES,
            got: k.min(n.saturating_sub(1)),
        });
    }
    let mut sorted = surprisals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let threshold = sorted[n - k - 1];
    let values: Vec<f64> = sorted[n - k..]
        .iter()
        .filter(|&&s| s > threshold && s.is_finite())
        .map(|&s| s - threshold)
        .collect();
    if values.len() < MIN_EXCEEDANCES {
        return Err(Error::InsufficientData {
            what: "finite GPD exceedances strictly above the threshold",
            needed: MIN_EXCEEDANCES,
            got: values.len(),
        });
    }
    Ok(Exceedances {
        threshold,
        values,
        beta,
    })
}

/// `⌈βn⌉`, robust to representation error in `βn`.
pub fn exceedance_count(n: usize, beta: f64) -> usize {
    let raw = beta * n as f64;
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 * raw.max(1.0) {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

/// GPD log-likelihood of excesses `x`.
pub fn gpd_loglik(x: &[f64], sigma: f64, xi: f64) -> f64 {
    if !(sigma > 0.0) {
        return f64::NEG_INFINITY;
    }
    let k = x.len() as f64;
    if xi.abs() <= XI_TOL {
        return -k * sigma.ln() - x.iter().sum::<f64>() / sigma;
    }
    let ratio = xi / sigma;
    let mut acc = 0.0;
    for &v in x {
        let t = ratio * v;
        if t <= -1.0 {
            return f64::NEG_INFINITY;
        }
        acc += t.ln_1p();
    }
    -k * sigma.ln() - (1.0 + 1.0 / xi) * acc
}

/// Maximum-likelihood fit to excesses over a zero threshold.
///
/// Optimises `(ln σ, ξ)` by Nelder–Mead from several starts (a
/// method-of-moments guess plus a fixed ladder of shapes) with
/// `ξ ∈ (-1, 10)`; the start with the best log-likelihood wins and ties go
/// to the smaller `ξ`.
pub fn fit_gpd(excesses: &[f64]) -> Result<GpdFit> {
    if excesses.len() < MIN_EXCEEDANCES {
        return Err(Error::InsufficientData {
            what: "GPD exceedances",
            needed: MIN_EXCEEDANCES,
            got: excesses.len(),
        });
    }
    if excesses.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(invalid("GPD excesses must be finite and nonnegative"));
    }
    let k = excesses.len() as f64;
    let mean = excesses.iter().sum::<f64>() / k;
    let var = excesses.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let max = excesses.iter().copied().fold(0.0, f64::max);
    if var <= f64::EPSILON * mean * mean || max == 0.0 {
        return Err(Error::Degenerate(
            "all GPD excesses are equal; the shape is not identifiable".into(),
        ));
    }

    let objective = |p: &[f64]| {
        let (sigma, xi) = (p[0].exp(), p[1]);
        if xi <= XI_BOUNDS.0 || xi >= XI_BOUNDS.1 {
            return f64::INFINITY;
        }
        -gpd_loglik(excesses, sigma, xi)
    };

    let mut starts = Vec::with_capacity(6);
    let ratio = mean * mean / var;
    let xi_mom = (0.5 * (1.0 - ratio)).clamp(-0.9, 5.0);
    starts.push((0.5 * mean * (1.0 + ratio), xi_mom));
    for xi in [0.0, -0.25, 0.25, 0.5, 1.0] {
        let sigma = if xi < 1.0 { mean * (1.0 - xi) } else { median(excesses) };
        starts.push((sigma, xi));
    }

    let nm = NelderMead::default();
    let mut best: Option<(f64, f64, f64)> = None;
    let mut any_converged = false;
    let mut best_any = (f64::NAN, f64::NAN, f64::NEG_INFINITY);
    for (sigma0, xi0) in starts {
        // keep the start inside the support when ξ < 0
        let sigma0 = if xi0 < 0.0 {
            sigma0.max(-xi0 * max * 1.05)
        } else {
            sigma0
        };
        let first = nm.minimize(objective, &[sigma0.ln(), xi0]);
        // restart from the optimum to guard against a collapsed simplex
        let m = NelderMead {
            initial_step: 0.02,
            ..nm
        }
        .minimize(objective, &first.x);
        let (sigma, xi, ll) = (m.x[0].exp(), m.x[1], -m.value);
        if ll > best_any.2 {
            best_any = (sigma, xi, ll);
        }
        if !(first.converged || m.converged) || !ll.is_finite() {
            continue;
        }
        any_converged = true;
        best = match best {
            None => Some((sigma, xi, ll)),
            Some(b) => {
                let tie = (ll - b.2).abs() <= 1e-9 * (1.0 + b.2.abs());
                if (tie && xi < b.1) || (!tie && ll > b.2) {
                    Some((sigma, xi, ll))
                } else {
                    Some(b)
                }
            }
        };
    }
    match best {
        Some((sigma, xi, loglik)) if any_converged => Ok(GpdFit {
            threshold_u: 0.0,
            scale_sigma: sigma,
            shape_xi: xi,
            n_exceed: excesses.len(),
            beta: 1.0,
            loglik,
        }),
        _ => Err(Error::GpdNonConvergence {
            starts: 6,
            best_sigma: best_any.0,
            best_xi: best_any.1,
            best_loglik: best_any.2,
        }),
    }
}

fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl GpdFit {
    /// Selects the top `β` fraction of `surprisals` and fits the GPD to it.
    pub fn fit_tail(surprisals: &[f64], beta: f64) -> Result<Self> {
        let exc = select_exceedances(surprisals, beta)?;
        let fit = fit_gpd(&exc.values)?;
        Ok(Self {
            threshold_u: exc.threshold,
            beta,
            ..fit
        })
    }

    /// GPD distribution function at surprisal `s >= u`.
    pub fn cdf(&self, s: f64) -> Result<f64> {
        if s < self.threshold_u || s.is_nan() {
            return Err(invalid(format!(
                "GPD cdf is defined above the threshold {}, got {s}",
                self.threshold_u
            )));
        }
        Ok(self.cdf_excess(s - self.threshold_u))
    }

    fn cdf_excess(&self, x: f64) -> f64 {
        -self.log_sf_excess(x).exp_m1()
    }

    /// `log(1 - P(x))` for an excess `x >= 0`.
    fn log_sf_excess(&self, x: f64) -> f64 {
        let z = x / self.scale_sigma;
        let xi = self.shape_xi;
        if xi.abs() <= XI_TOL {
            return -z;
        }
        if 1.0 + xi * z <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (-1.0 / xi) * (xi * z).ln_1p()
    }

    /// Inverse of [`GpdFit::cdf`] for `p ∈ [0, 1)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(invalid(format!("GPD quantile needs 0 <= p < 1, got {p}")));
        }
        let xi = self.shape_xi;
        let x = if xi.abs() <= XI_TOL {
            -self.scale_sigma * (-p).ln_1p()
        } else {
            self.scale_sigma / xi * (-xi * (-p).ln_1p()).exp_m1()
        };
        Ok(self.threshold_u + x)
    }

    /// `β` at or below the threshold, `β [1 - P(s)]` above it.
    pub fn tail_prob(&self, s: f64) -> f64 {
        if s <= self.threshold_u {
            self.beta
        } else if s == f64::INFINITY {
            0.0
        } else {
            self.beta * self.log_sf_excess(s - self.threshold_u).exp()
        }
    }

    pub fn tail_probs(&self, surprisals: &[f64]) -> Vec<f64> {
        surprisals.iter().map(|&s| self.tail_prob(s)).collect()
    }
}

/// Inverse-CDF draws from `GPD(σ, ξ)` (excesses over zero).
pub fn gpd_sample(sigma: f64, xi: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) || !xi.is_finite() {
        return Err(invalid(format!("invalid GPD parameters sigma={sigma}, xi={xi}")));
    }
    if n == 0 {
        return Err(invalid("sample size must be positive"));
    }
    let mut rng = seeded(seed);
    Ok(gpd_sample_with(sigma, xi, n, &mut rng))
}

pub fn gpd_sample_with<R: Rng + ?Sized>(sigma: f64, xi: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let fit = GpdFit {
        threshold_u: 0.0,
        scale_sigma: sigma,
        shape_xi: xi,
        n_exceed: 0,
        beta: 1.0,
        loglik: f64::NAN,
    };
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            fit.quantile(u).expect("u in [0, 1)")
        })
        .collect()
}
