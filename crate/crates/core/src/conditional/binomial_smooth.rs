//! Binomial regression of successes on trials with a smooth logit.
//!
//! `logit p = g(log n)` where `g` is a natural cubic spline with knots at the
//! deciles of `log n`. Coefficients are the unpenalised maximum-likelihood
//! estimates, found by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};

use crate::distributions::{binomial_log_pmf, Points};
use crate::error::{invalid, Error, Result};
use crate::surprisal::SurprisalSample;

pub const MIN_ROWS: usize = 50;
const MAX_ITER: usize = 100;
const DEVIANCE_TOL: f64 = 1e-10;
const KNOT_QUANTILES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq)]
pub struct BinomialSmoothFit {
    /// Spline knots on the `log(trials)` scale.
    pub knots: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub deviance: f64,
    pub iterations: usize,
}

impl BinomialSmoothFit {
    /// Fitted success probability for `trials` attempts. Outside the knot
    /// range the logit is linear in `log(trials)`.
    pub fn fitted_prob(&self, trials: f64) -> f64 {
        let eta: f64 = basis(&self.knots, trials.ln())
            .iter()
            .zip(&self.coefficients)
            .map(|(b, c)| b * c)
            .sum();
        expit(eta)
    }
}

/// Natural cubic spline basis at `x`: `1, x` and one truncated-power term
/// per interior knot, constrained to be linear beyond the boundary knots.
fn basis(knots: &[f64], x: f64) -> Vec<f64> {
    let k = knots.len();
    let mut out = vec![1.0];
    if k == 0 {
        return out;
    }
    out.push(x);
    if k < 3 {
        return out;
    }
    let cube = |v: f64| if v > 0.0 { v * v * v } else { 0.0 };
    let last = knots[k - 1];
    let d = |j: usize| (cube(x - knots[j]) - cube(x - last)) / (last - knots[j]);
    let d_prev = d(k - 2);
    for j in 0..k - 2 {
        out.push(d(j) - d_prev);
    }
    out
}

fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    // linear interpolation between order statistics
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn validate(trials: &[u64], successes: &[u64]) -> Result<()> {
    if trials.len() != successes.len() {
        return Err(invalid(format!(
            "{} trial counts but {} success counts",
            trials.len(),
            successes.len()
        )));
    }
    for (i, (&n, &y)) in trials.iter().zip(successes).enumerate() {
        if n == 0 {
            return Err(invalid(format!("row {i}: trials must be at least 1")));
        }
        if y > n {
            return Err(invalid(format!("row {i}: {y} successes exceed {n} trials")));
        }
    }
    Ok(())
}

/// Fits the smooth to `(trials, successes)` pairs (innings and not-outs).
pub fn fit_binomial_smooth(trials: &[u64], successes: &[u64]) -> Result<BinomialSmoothFit> {
    validate(trials, successes)?;
    if trials.len() < MIN_ROWS {
        return Err(Error::InsufficientData {
            what: "rows for the binomial smoother",
            needed: MIN_ROWS,
            got: trials.len(),
        });
    }
    let x: Vec<f64> = trials.iter().map(|&n| (n as f64).ln()).collect();
    let mut sorted = x.clone();
    sorted.sort_by(f64::total_cmp);
    let mut knots: Vec<f64> = KNOT_QUANTILES.iter().map(|&q| quantile_sorted(&sorted, q)).collect();
    knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    if sorted[0] == sorted[sorted.len() - 1] {
        knots.clear();
    }

    let rows = x.len();
    let mut design = DMatrix::zeros(rows, basis(&knots, 0.0).len());
    for (i, &xi) in x.iter().enumerate() {
        for (j, b) in basis(&knots, xi).into_iter().enumerate() {
            design[(i, j)] = b;
        }
    }
    let n: Vec<f64> = trials.iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = successes.iter().map(|&v| v as f64).collect();

    let deviance = |mu: &[f64]| -> f64 {
        let mut dev = 0.0;
        for i in 0..rows {
            let (yi, ni, m) = (y[i], n[i], mu[i]);
            if yi > 0.0 {
                dev += yi * (yi / (ni * m)).ln();
            }
            if ni - yi > 0.0 {
                dev += (ni - yi) * ((ni - yi) / (ni * (1.0 - m))).ln();
            }
        }
        2.0 * dev
    };

    let mut eta: Vec<f64> = (0..rows)
        .map(|i| {
            let p = (y[i] + 0.5) / (n[i] + 1.0);
            (p / (1.0 - p)).ln()
        })
        .collect();
    let mut mu: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();
    let mut trace = vec![deviance(&mu)];
    for iter in 1..=MAX_ITER {
        let mut w = DVector::zeros(rows);
        let mut z = DVector::zeros(rows);
        for i in 0..rows {
            let v = mu[i] * (1.0 - mu[i]);
            w[i] = n[i] * v;
            z[i] = eta[i] + (y[i] / n[i] - mu[i]) / v;
        }
        let mut xtw = design.transpose();
        for (j, mut col) in xtw.column_iter_mut().enumerate() {
            col *= w[j];
        }
        let gram = &xtw * &design;
        let rhs = &xtw * &z;
        let chol = gram.cholesky().ok_or_else(|| Error::SmootherFailure {
            reason: format!("weighted normal equations are singular at iteration {iter}"),
            trace: trace.clone(),
        })?;
        let beta = chol.solve(&rhs);
        let new_eta = &design * &beta;
        eta = new_eta.iter().copied().collect();
        mu = eta.iter().map(|&e| expit(e)).collect();
        let dev = deviance(&mu);
        trace.push(dev);
        if !dev.is_finite() || eta.iter().any(|e| e.abs() > 30.0) {
            return Err(Error::SmootherFailure {
                reason: "fitted probabilities reached 0 or 1 (separation)".into(),
                trace,
            });
        }
        let prev = trace[trace.len() - 2];
        if (prev - dev).abs() <= DEVIANCE_TOL * (dev.abs() + 0.1) {
            return Ok(BinomialSmoothFit {
                knots,
                coefficients: beta.iter().copied().collect(),
                deviance: dev,
                iterations: iter,
            });
        }
    }
    Err(Error::SmootherFailure {
        reason: format!("no convergence in {MAX_ITER} iterations"),
        trace,
    })
}

/// `-log Binomial(successes; trials, p̂(trials))` for each row. Observations
/// are stored as `(trials, successes)` pairs.
pub fn binomial_surprisals(
    fit: &BinomialSmoothFit,
    trials: &[u64],
    successes: &[u64],
) -> Result<SurprisalSample> {
    validate(trials, successes)?;
    let surprisals = trials
        .iter()
        .zip(successes)
        .map(|(&n, &y)| -binomial_log_pmf(n, fit.fitted_prob(n as f64), y as f64))
        .collect();
    let rows: Vec<f64> = trials
        .iter()
        .zip(successes)
        .flat_map(|(&n, &y)| [n as f64, y as f64])
        .collect();
    SurprisalSample::from_parts(Points::new(2, rows)?, surprisals, "binomial(trials, smooth p)")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;
    use rand_distr::{Binomial, Distribution};

    fn synthetic(rows: usize, seed: u64, p: impl Fn(f64) -> f64) -> (Vec<u64>, Vec<u64>) {
        let mut rng = seeded(seed);
        let mut trials = Vec::with_capacity(rows);
        let mut succ = Vec::with_capacity(rows);
        for _ in 0..rows {
            // heavy-tailed innings counts, mostly small
            let u: f64 = rng.random();
            let n = (1.0 / (1.0 - u).powf(0.8)).min(300.0).ceil() as u64;
            let y = Binomial::new(n, p(n as f64)).unwrap().sample(&mut rng);
            trials.push(n);
            succ.push(y);
        }
        (trials, succ)
    }

    #[test]
    fn basis_is_linear_outside_knots() {
        let knots = [0.0, 1.0, 2.0, 3.0];
        let at = |x: f64| basis(&knots, x);
        for x in [4.0, 5.0, 6.0] {
            let (a, b, c) = (at(x - 0.5), at(x), at(x + 0.5));
            for j in 0..a.len() {
                assert!((a[j] - 2.0 * b[j] + c[j]).abs() < 1e-9);
            }
        }
        assert!(at(-1.0)[2..].iter().all(|&v| v == 0.0));
        assert_eq!(at(1.5).len(), 4);
    }

    #[test]
    fn constant_probability_is_recovered() {
        let (trials, succ) = synthetic(3000, 1, |_| 0.13);
        let fit = fit_binomial_smooth(&trials, &succ).unwrap();
        let pooled = succ.iter().sum::<u64>() as f64 / trials.iter().sum::<u64>() as f64;
        for n in [1.0, 2.0, 5.0, 20.0, 80.0, 250.0] {
            let p = fit.fitted_prob(n);
            assert!((p - 0.13).abs() <= 0.02, "n={n}: {p}");
            assert!((p - pooled).abs() <= 0.02);
        }
    }

    #[test]
    fn decreasing_curve_is_tracked() {
        let truth = |n: f64| 0.1 + 0.15 / n.sqrt();
        let (trials, succ) = synthetic(4000, 2, truth);
        let fit = fit_binomial_smooth(&trials, &succ).unwrap();
        assert!(fit.fitted_prob(1.0) > fit.fitted_prob(200.0));
        for n in [3.0, 30.0, 150.0] {
            assert!((fit.fitted_prob(n) - truth(n)).abs() < 0.03, "n={n}");
        }
    }

    #[test]
    fn surprisal_is_u_shaped_in_successes() {
        let (trials, succ) = synthetic(500, 3, |_| 0.2);
        let fit = fit_binomial_smooth(&trials, &succ).unwrap();
        let n = 60u64;
        let counts: Vec<u64> = (0..=n).collect();
        let s = binomial_surprisals(&fit, &vec![n; counts.len()], &counts).unwrap().surprisals;
        let mode = (0..s.len()).min_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        let p = fit.fitted_prob(n as f64);
        assert!((mode as f64 - n as f64 * p).abs() <= 1.0);
        assert!(s[..mode].windows(2).all(|w| w[0] >= w[1]));
        assert!(s[mode..].windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn bad_inputs() {
        assert!(fit_binomial_smooth(&[10], &[3]).is_err());
        let trials = vec![10u64; 60];
        let mut succ = vec![3u64; 60];
        succ[5] = 11;
        assert!(fit_binomial_smooth(&trials, &succ).is_err());
        assert!(fit_binomial_smooth(&[0; 60], &[0; 60]).is_err());
    }

    #[test]
    fn separation_is_reported_with_trace() {
        // no successes anywhere: the MLE is p = 0
        let trials: Vec<u64> = (1..=80).collect();
        let succ = vec![0u64; 80];
        match fit_binomial_smooth(&trials, &succ) {
            Err(Error::SmootherFailure { trace, .. }) => assert!(!trace.is_empty()),
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
