//! The Hampel identifier as a conditional Normal model.
//!
//! Observation `y_t` is scored against `N(m_t, σ_t²)` where `m_t` is the
//! median of the window `y_{t-h}..=y_{t+h}` (truncated at the ends of the
//! series), `a_t` the median absolute deviation about `m_t`, and
//! `σ_t = max(a_t, min_scale) / Φ⁻¹(0.75)`.

use crate::assumed::AssumedTail;
use crate::distributions::{normal_cdf, normal_quantile, DistributionModel, Points};
use crate::error::{invalid, Error, Result};
use crate::surprisal::{SurprisalSample, TailEstimate, TailMethod, TailParams};

/// `Φ⁻¹(0.75)`, the MAD-to-σ constant for Normal data.
pub fn mad_constant() -> f64 {
    normal_quantile(0.75).expect("0.75 is inside (0, 1)")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HampelModel {
    pub half_window_h: usize,
    /// Floor on `a_t`. `None` means `1e-8` times the MAD of the whole series.
    pub min_scale: Option<f64>,
}

/// Per-time-step window statistics and the resulting surprisals.
#[derive(Debug, Clone, PartialEq)]
pub struct HampelSeries {
    pub sample: SurprisalSample,
    pub medians: Vec<f64>,
    pub mads: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub min_scale: f64,
}

impl HampelModel {
    pub fn new(half_window_h: usize) -> Self {
        Self {
            half_window_h,
            min_scale: None,
        }
    }

    pub fn with_min_scale(mut self, min_scale: f64) -> Self {
        self.min_scale = Some(min_scale);
        self
    }

    pub fn surprisals(&self, y: &[f64]) -> Result<HampelSeries> {
        let h = self.half_window_h;
        if h == 0 {
            return Err(invalid("Hampel half-window must be at least 1"));
        }
        if y.len() < 2 * h + 1 {
            return Err(Error::InsufficientData {
                what: "series length for the Hampel window (2h + 1)",
                needed: 2 * h + 1,
                got: y.len(),
            });
        }
        if let Some(t) = y.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("series value at index {t} is not finite")));
        }
        let min_scale = match self.min_scale {
            Some(m) if m >= 0.0 && m.is_finite() => m,
            Some(m) => return Err(invalid(format!("min_scale must be >= 0, got {m}"))),
            None => {
                let med = median(&mut y.to_vec());
                1e-8 * median(&mut y.iter().map(|v| (v - med).abs()).collect::<Vec<_>>())
            }
        };
        let k = mad_constant();

        let n = y.len();
        let mut medians = Vec::with_capacity(n);
        let mut mads = Vec::with_capacity(n);
        let mut sigmas = Vec::with_capacity(n);
        let mut surprisals = Vec::with_capacity(n);
        let mut buf = Vec::with_capacity(2 * h + 1);
        for t in 0..n {
            let window = &y[t.saturating_sub(h)..(t + h + 1).min(n)];
            buf.clear();
            buf.extend_from_slice(window);
            let m = median(&mut buf);
            buf.clear();
            buf.extend(window.iter().map(|v| (v - m).abs()));
            let a = median(&mut buf);
            let scale = a.max(min_scale);
            if scale <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "Hampel window around index {t} is constant and min_scale is 0"
                )));
            }
            let sigma = scale / k;
            let model = DistributionModel::Normal { mu: m, sigma };
            surprisals.push(-model.log_density_unchecked(&[y[t]]));
            medians.push(m);
            mads.push(a);
            sigmas.push(sigma);
        }
        let sample = SurprisalSample::from_parts(
            Points::scalars(y.to_vec()),
            surprisals,
            format!("hampel(h={h})"),
        )?;
        Ok(HampelSeries {
            sample,
            medians,
            mads,
            sigmas,
            min_scale,
        })
    }
}

impl HampelSeries {
    /// The conditional Normal for each time step.
    pub fn models(&self) -> Vec<DistributionModel> {
        self.medians
            .iter()
            .zip(&self.sigmas)
            .map(|(&mu, &sigma)| DistributionModel::Normal { mu, sigma })
            .collect()
    }

    /// Tail probabilities under each step's own Normal.
    pub fn assumed_estimate(&self) -> TailEstimate {
        let probs = self
            .models()
            .iter()
            .zip(&self.sample.surprisals)
            .map(|(m, &s)| AssumedTail::new(m).prob(s))
            .collect();
        TailEstimate {
            probs,
            method: TailMethod::Assumed,
            params: TailParams::Assumed {
                model: self.sample.model_description.clone(),
            },
        }
    }
}

/// Surprisals of `y` under the Hampel model with default `min_scale`.
pub fn hampel_surprisals(y: &[f64], h: usize) -> Result<HampelSeries> {
    HampelModel::new(h).surprisals(y)
}

/// False-anomaly rate of the rule `|y_t - m_t| / a_t > τ` for Normal data:
/// `2 [1 - Φ(τ Φ⁻¹(0.75))]`.
pub fn hampel_alpha_from_tau(tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid(format!("tau must be finite and > 0, got {tau}")));
    }
    Ok(2.0 * normal_cdf(-tau * mad_constant()))
}

/// Inverse of [`hampel_alpha_from_tau`].
pub fn hampel_tau_from_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(-normal_quantile(0.5 * alpha)? / mad_constant())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
