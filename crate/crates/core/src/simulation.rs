//! Simulation experiments on misspecified models.
//!
//! * [`run_expt_univariate`]: data from one symmetric distribution scored
//!   under another; tail-probability estimates at fixed `y` are compared
//!   with the truth.
//! * [`run_expt_false_rate`]: the fraction of iid points flagged at level
//!   `α` as the sample size grows, for several assumed models and
//!   estimators.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::assumed::AssumedTail;
use crate::distributions::DistributionModel;
use crate::empirical::{self, EcdfTail};
use crate::error::{invalid, Error, Result};
use crate::gpd::{exceedance_count, GpdFit, MIN_EXCEEDANCES};
use crate::rng::{replicate, stream};

pub const DEFAULT_REPS: usize = 1000;
pub const FAST_REPS: usize = 100;
pub const DEFAULT_N_GRID: [usize; 7] = [100, 200, 500, 1000, 2000, 5000, 10_000];

/// A model with a short label for output tables.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedModel {
    pub name: String,
    pub model: DistributionModel,
}

impl NamedModel {
    pub fn new(name: impl Into<String>, model: DistributionModel) -> Self {
        Self {
            name: name.into(),
            model,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorSpec {
    Assumed,
    Empirical,
    Gpd { beta: f64 },
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorSpec::Assumed => f.write_str("assumed"),
            EstimatorSpec::Empirical => f.write_str("empirical"),
            EstimatorSpec::Gpd { beta } => write!(f, "gpd({beta})"),
        }
    }
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    /// `assumed`, `empirical`, `gpd` (β = 0.1) or `gpd(β)`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "assumed" => return Ok(Self::Assumed),
            "empirical" => return Ok(Self::Empirical),
            "gpd" => return Ok(Self::Gpd { beta: crate::gpd::DEFAULT_BETA }),
            _ => {}
        }
        if let Some(inner) = t.strip_prefix("gpd(").and_then(|r| r.strip_suffix(')')) {
            let beta: f64 = inner
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad beta in `{s}`")))?;
            if beta > 0.0 && beta < 1.0 {
                return Ok(Self::Gpd { beta });
            }
            return Err(invalid(format!("beta must lie in (0, 1), got {beta}")));
        }
        Err(invalid(format!("unknown estimator `{s}`")))
    }
}

/// Design of either experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub true_model: NamedModel,
    pub assumed_models: Vec<NamedModel>,
    pub estimators: Vec<EstimatorSpec>,
    pub n_grid: Vec<usize>,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.true_model.model.validate()?;
        if self.assumed_models.is_empty() || self.estimators.is_empty() || self.n_grid.is_empty() {
            return Err(invalid("experiment needs assumed models, estimators and sample sizes"));
        }
        let arity = self.true_model.model.arity();
        for m in &self.assumed_models {
            m.model.validate()?;
            if m.model.arity() != arity {
                return Err(Error::ArityMismatch {
                    expected: arity,
                    got: m.model.arity(),
                });
            }
        }
        if self.reps == 0 {
            return Err(invalid("reps must be at least 1"));
        }
        if self.n_grid.contains(&0) {
            return Err(invalid("sample sizes must be positive"));
        }
        crate::surprisal::check_alpha(self.alpha)
    }

    /// Normal data scored under `N(0,1)` and `t(4)`, `n = 1000`.
    pub fn univariate_default(truth_is_t: bool, reps: usize, seed: u64) -> Self {
        let normal = NamedModel::new("N(0,1)", DistributionModel::Normal { mu: 0.0, sigma: 1.0 });
        let t4 = NamedModel::new(
            "t(4)",
            DistributionModel::StudentT {
                nu: 4.0,
                loc: 0.0,
                scale: 1.0,
            },
        );
        Self {
            true_model: if truth_is_t { t4.clone() } else { normal.clone() },
            assumed_models: vec![normal, t4],
            estimators: vec![
                EstimatorSpec::Assumed,
                EstimatorSpec::Empirical,
                EstimatorSpec::Gpd { beta: 0.1 },
            ],
            n_grid: vec![1000],
            alpha: 0.01,
            reps,
            seed,
        }
    }

    /// Two independent Gamma(2, 2) coordinates scored under the truth, a
    /// Normal with the same mean and variance, and a product of `t(4)`s
    /// with that location and scale.
    pub fn false_rate_default(reps: usize, seed: u64) -> Self {
        let gamma = DistributionModel::Gamma {
            shape: 2.0,
            rate: 2.0,
        };
        let sd = 0.5f64.sqrt();
        let normal = DistributionModel::Normal { mu: 1.0, sigma: sd };
        let t4 = DistributionModel::StudentT {
            nu: 4.0,
            loc: 1.0,
            scale: sd,
        };
        let truth = NamedModel::new(
            "gamma",
            DistributionModel::IndependentProduct(vec![gamma.clone(), gamma]),
        );
        Self {
            true_model: truth.clone(),
            assumed_models: vec![
                truth,
                NamedModel::new("normal", DistributionModel::IndependentProduct(vec![normal.clone(), normal])),
                NamedModel::new("t4", DistributionModel::IndependentProduct(vec![t4.clone(), t4])),
            ],
            estimators: vec![
                EstimatorSpec::Assumed,
                EstimatorSpec::Empirical,
                EstimatorSpec::Gpd { beta: 0.1 },
            ],
            n_grid: DEFAULT_N_GRID.to_vec(),
            alpha: 0.01,
            reps,
            seed,
        }
    }
}

/// `2.5, 2.6, ..., 4.5`.
pub fn default_y_grid() -> Vec<f64> {
    (0..=20).map(|i| 2.5 + 0.1 * i as f64).map(|y| (y * 10.0).round() / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnivariateRow {
    pub y: f64,
    pub distribution_used: String,
    pub estimator: String,
    pub p_estimate: f64,
    pub p_true: f64,
}

fn surprisal_of(model: &DistributionModel, y: &[f64]) -> f64 {
    -model.log_density_unchecked(y)
}

/// Averages, over `config.reps` samples of size `config.n_grid[0]` from the
/// truth, each estimator's `Pr(S >= s(y))` at every `y` in `y_grid`.
///
/// Grid points are evaluated directly: the empirical estimate is the
/// fraction of sample surprisals at least `s(y)` and the GPD estimate uses
/// the tail fitted to the sample. `p_true` is the same probability under
/// the true model, scored with the true density.
pub fn run_expt_univariate(config: &ExperimentConfig, y_grid: &[f64]) -> Result<Vec<UnivariateRow>> {
    config.validate()?;
    if config.true_model.model.arity() != 1 {
        return Err(invalid("the univariate experiment needs scalar models"));
    }
    if y_grid.is_empty() {
        return Err(invalid("empty y grid"));
    }
    let n = config.n_grid[0];
    let truth = &config.true_model.model;
    let true_tail = AssumedTail::new(truth);
    let p_true: Vec<f64> = y_grid
        .iter()
        .map(|&y| true_tail.prob(surprisal_of(truth, &[y])))
        .collect();

    let models = &config.assumed_models;
    let tails: Vec<AssumedTail> = models.iter().map(|m| AssumedTail::new(&m.model)).collect();
    let grid_s: Vec<Vec<f64>> = models
        .iter()
        .map(|m| y_grid.iter().map(|&y| surprisal_of(&m.model, &[y])).collect())
        .collect();

    // per replication: [model][estimator][grid point]
    let per_rep: Vec<Result<Vec<Vec<Vec<f64>>>>> = replicate(config.reps, |r| {
        let mut rng = stream(config.seed, r as u64);
        let sample = truth.sample_with(n, &mut rng);
        let mut out = Vec::with_capacity(models.len());
        for (mi, m) in models.iter().enumerate() {
            let s: Vec<f64> = sample.iter().map(|y| surprisal_of(&m.model, y)).collect();
            let mut by_est = Vec::with_capacity(config.estimators.len());
            for est in &config.estimators {
                let probs: Vec<f64> = match *est {
                    EstimatorSpec::Assumed => grid_s[mi].iter().map(|&g| tails[mi].prob(g)).collect(),
                    EstimatorSpec::Empirical => {
                        let ecdf = EcdfTail::new(&s)?;
                        grid_s[mi].iter().map(|&g| ecdf.tail_prob(g)).collect()
                    }
                    EstimatorSpec::Gpd { beta } => {
                        let fit = GpdFit::fit_tail(&s, beta)?;
                        grid_s[mi].iter().map(|&g| fit.tail_prob(g)).collect()
                    }
                };
                by_est.push(probs);
            }
            out.push(by_est);
        }
        Ok(out)
    });
    let per_rep: Vec<Vec<Vec<Vec<f64>>>> = per_rep.into_iter().collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (mi, m) in models.iter().enumerate() {
        for (ei, est) in config.estimators.iter().enumerate() {
            for (gi, &y) in y_grid.iter().enumerate() {
                let mean = per_rep.iter().map(|r| r[mi][ei][gi]).sum::<f64>() / config.reps as f64;
                rows.push(UnivariateRow {
                    y,
                    distribution_used: m.name.clone(),
                    estimator: est.to_string(),
                    p_estimate: mean,
                    p_true: p_true[gi],
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FalseRateRow {
    pub n: usize,
    pub assumed_model: String,
    pub estimator: String,
    pub mean_flag_rate: f64,
    /// Normal-approximation binomial 95% interval over all `n · reps` points.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Standard error of the mean rate from the spread across replications.
    pub mc_se: f64,
}

/// How often two assumed models flag exactly the same points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementRow {
    pub n: usize,
    pub model_a: String,
    pub model_b: String,
    pub estimator: String,
    pub reps: usize,
    pub identical_sets: usize,
    pub identical_counts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FalseRateResult {
    pub rows: Vec<FalseRateRow>,
    pub agreement: Vec<AgreementRow>,
    /// Per-replication rates, indexed `[n][model][estimator][rep]`.
    pub rates: Vec<Vec<Vec<Vec<f64>>>>,
}

impl FalseRateResult {
    pub fn row(&self, n: usize, model: &str, estimator: &str) -> Option<&FalseRateRow> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.assumed_model == model && r.estimator == estimator)
    }
}

struct RepOutcome {
    /// `[model][estimator]`
    rates: Vec<Vec<f64>>,
    /// `[model][estimator]` flagged indices
    flags: Vec<Vec<Vec<usize>>>,
}

/// Flag rates at level `alpha` for every (n, assumed model, estimator).
///
/// Replication `r` at the `k`-th sample size draws from stream
/// `(k << 32) | r`, so every assumed model and estimator sees the same data.
/// Flag sets are compared between the first assumed model and each of the
/// others.
///
/// A GPD estimator is skipped at sample sizes where `beta * n` falls short
/// of the minimum exceedance count: it gets no row, and its per-replication
/// rates are NaN.
pub fn run_expt_false_rate(config: &ExperimentConfig) -> Result<FalseRateResult> {
    config.validate()?;
    let truth = &config.true_model.model;
    let models = &config.assumed_models;
    let needs_assumed = config.estimators.contains(&EstimatorSpec::Assumed);
    let tails: Vec<Option<AssumedTail>> = models
        .iter()
        .map(|m| needs_assumed.then(|| AssumedTail::new(&m.model)))
        .collect();

    let mut rows = Vec::new();
    let mut agreement = Vec::new();
    let mut all_rates = Vec::new();
    for (k, &n) in config.n_grid.iter().enumerate() {
        let usable: Vec<bool> = config
            .estimators
            .iter()
            .map(|e| match *e {
                EstimatorSpec::Gpd { beta } => exceedance_count(n, beta) >= MIN_EXCEEDANCES,
                _ => true,
            })
            .collect();
        let outcomes: Vec<Result<RepOutcome>> = replicate(config.reps, |r| {
            let mut rng = stream(config.seed, ((k as u64) << 32) | r as u64);
            let sample = truth.sample_with(n, &mut rng);
            let mut rates = Vec::with_capacity(models.len());
            let mut flags = Vec::with_capacity(models.len());
            for (mi, m) in models.iter().enumerate() {
                let s: Vec<f64> = sample.iter().map(|y| surprisal_of(&m.model, y)).collect();
                let mut mr = Vec::with_capacity(config.estimators.len());
                let mut mf = Vec::with_capacity(config.estimators.len());
                for (ei, est) in config.estimators.iter().enumerate() {
                    if !usable[ei] {
                        mr.push(f64::NAN);
                        mf.push(Vec::new());
                        continue;
                    }
                    let probs = match *est {
                        EstimatorSpec::Assumed => {
                            let tail = tails[mi].as_ref().expect("built when requested");
                            s.iter().map(|&v| tail.prob(v)).collect()
                        }
                        EstimatorSpec::Empirical => empirical::tail_probs(&s)?,
                        EstimatorSpec::Gpd { beta } => GpdFit::fit_tail(&s, beta)?.tail_probs(&s),
                    };
                    let flagged: Vec<usize> = probs
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p < config.alpha)
                        .map(|(i, _)| i)
                        .collect();
                    mr.push(flagged.len() as f64 / n as f64);
                    mf.push(flagged);
                }
                rates.push(mr);
                flags.push(mf);
            }
            Ok(RepOutcome { rates, flags })
        });
        let outcomes: Vec<RepOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

        let mut rates_n = Vec::with_capacity(models.len());
        for (mi, m) in models.iter().enumerate() {
            let mut rates_m = Vec::with_capacity(config.estimators.len());
            for (ei, est) in config.estimators.iter().enumerate() {
                let rates: Vec<f64> = outcomes.iter().map(|o| o.rates[mi][ei]).collect();
                if !usable[ei] {
                    rates_m.push(rates);
                    continue;
                }
                let reps = rates.len() as f64;
                let mean = rates.iter().sum::<f64>() / reps;
                let var = if rates.len() > 1 {
                    rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (reps - 1.0)
                } else {
                    0.0
                };
                let half = 1.96 * (mean * (1.0 - mean) / (reps * n as f64)).sqrt();
                rows.push(FalseRateRow {
                    n,
                    assumed_model: m.name.clone(),
                    estimator: est.to_string(),
                    mean_flag_rate: mean,
                    ci_low: (mean - half).max(0.0),
                    ci_high: (mean + half).min(1.0),
                    mc_se: (var / reps).sqrt(),
                });
                rates_m.push(rates);
            }
            rates_n.push(rates_m);
        }
        for mi in 1..models.len() {
            for (ei, est) in config.estimators.iter().enumerate() {
                if !usable[ei] {
                    continue;
                }
                let identical_sets = outcomes
                    .iter()
                    .filter(|o| o.flags[0][ei] == o.flags[mi][ei])
                    .count();
                let identical_counts = outcomes
                    .iter()
                    .filter(|o| o.flags[0][ei].len() == o.flags[mi][ei].len())
                    .count();
                agreement.push(AgreementRow {
                    n,
                    model_a: models[0].name.clone(),
                    model_b: models[mi].name.clone(),
                    estimator: est.to_string(),
                    reps: config.reps,
                    identical_sets,
                    identical_counts,
                });
            }
        }
        all_rates.push(rates_n);
    }
    Ok(FalseRateResult {
        rows,
        agreement,
        rates: all_rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn estimator_spec_parsing() {
        assert_eq!("gpd".parse::<EstimatorSpec>().unwrap(), EstimatorSpec::Gpd { beta: 0.1 });
        assert_eq!("GPD(0.2)".parse::<EstimatorSpec>().unwrap(), EstimatorSpec::Gpd { beta: 0.2 });
        assert_eq!("empirical".parse::<EstimatorSpec>().unwrap(), EstimatorSpec::Empirical);
        assert!("gpd(2)".parse::<EstimatorSpec>().is_err());
        assert!("kde".parse::<EstimatorSpec>().is_err());
        assert_eq!(EstimatorSpec::Gpd { beta: 0.1 }.to_string(), "gpd(0.1)");
    }

    #[test]
    fn y_grid_has_21_points() {
        let g = default_y_grid();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 2.5);
        assert_eq!(g[5], 3.0);
        assert_eq!(g[20], 4.5);
    }

    #[test]
    fn normal_product_matches_bivariate_normal() {
        // N((1,1), 0.5 I) log-density, written out
        let cfg = ExperimentConfig::false_rate_default(1, 0);
        let m = &cfg.assumed_models[1].model;
        for y in [[1.0, 1.0], [0.2, 2.5], [-1.0, 3.0]] {
            let q = ((y[0] - 1.0f64).powi(2) + (y[1] - 1.0f64).powi(2)) / 0.5;
            let want = -(2.0 * std::f64::consts::PI).ln() - 0.5 * 0.25f64.ln() - 0.5 * q;
            assert_relative_eq!(m.log_density(&y).unwrap(), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn univariate_assumed_normal_is_exact() {
        let cfg = ExperimentConfig {
            estimators: vec![EstimatorSpec::Assumed],
            ..ExperimentConfig::univariate_default(false, 3, 1)
        };
        let rows = run_expt_univariate(&cfg, &[2.5, 3.0]).unwrap();
        let r = rows
            .iter()
            .find(|r| r.distribution_used == "N(0,1)" && r.y == 2.5)
            .unwrap();
        assert_relative_eq!(r.p_estimate, 0.012_419_330_651_552_265, epsilon = 1e-12);
        assert_relative_eq!(r.p_true, 0.012_419_330_651_552_265, epsilon = 1e-12);
        let t = rows
            .iter()
            .find(|r| r.distribution_used == "t(4)" && r.y == 3.0)
            .unwrap();
        assert_relative_eq!(t.p_estimate, 0.039_941_968_071_718_83, epsilon = 1e-11);
    }

    #[test]
    fn empirical_estimates_do_not_depend_on_symmetric_model() {
        let cfg = ExperimentConfig {
            estimators: vec![EstimatorSpec::Empirical],
            ..ExperimentConfig::univariate_default(false, 20, 2)
        };
        let rows = run_expt_univariate(&cfg, &default_y_grid()).unwrap();
        let (a, b): (Vec<_>, Vec<_>) = rows.iter().partition(|r| r.distribution_used == "N(0,1)");
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.y, rb.y);
            assert_eq!(ra.p_estimate, rb.p_estimate);
        }
    }

    #[test]
    fn false_rate_is_deterministic_and_shaped() {
        let cfg = ExperimentConfig {
            n_grid: vec![300, 600],
            ..ExperimentConfig::false_rate_default(4, 5)
        };
        let a = run_expt_false_rate(&cfg).unwrap();
        let b = run_expt_false_rate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 2 * 3 * 3);
        assert_eq!(a.agreement.len(), 2 * 2 * 3);
        for r in &a.rows {
            assert!(r.ci_low <= r.mean_flag_rate && r.mean_flag_rate <= r.ci_high);
        }
        // empirical: at most floor(n α) flags per replication
        for (k, &n) in cfg.n_grid.iter().enumerate() {
            for m in 0..3 {
                for &rate in &a.rates[k][m][1] {
                    assert!(rate * n as f64 <= (n as f64 * 0.01).floor() + 1e-9);
                }
            }
        }
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig::false_rate_default(2, 0);
        cfg.alpha = 1.5;
        assert!(run_expt_false_rate(&cfg).is_err());
        let mut cfg = ExperimentConfig::false_rate_default(2, 0);
        cfg.assumed_models.push(NamedModel::new("bad", DistributionModel::Normal { mu: 0.0, sigma: 1.0 }));
        assert!(matches!(run_expt_false_rate(&cfg), Err(Error::ArityMismatch { .. })));
        let cfg = ExperimentConfig::false_rate_default(2, 0);
        assert!(run_expt_univariate(&cfg, &[3.0]).is_err());
    }
    #[test]
    fn gpd_is_skipped_when_n_is_too_small() {
        let mut cfg = ExperimentConfig::false_rate_default(2, 3);
        cfg.n_grid = vec![100, 200];
        let out = run_expt_false_rate(&cfg).unwrap();
        assert!(out.row(100, "gamma", "gpd(0.1)").is_none());
        assert!(out.row(100, "gamma", "empirical").is_some());
        assert!(out.row(200, "gamma", "gpd(0.1)").is_some());
        assert!(out.rates[0][0][2].iter().all(|r| r.is_nan()));
    }
}
