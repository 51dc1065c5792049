//! Surprisals, tail probabilities and anomaly flags.
//!
//! `s_i = -log f(y_i)` is turned into `p_i = Pr(S >= s_i)` by one of three
//! estimators, and observations with `p_i < α` are flagged.

use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;

use crate::assumed::AssumedTail;
use crate::distributions::{DistributionModel, Points};
use crate::empirical;
use crate::error::{invalid, Error, Result};
use crate::gpd::GpdFit;

/// Observations with their surprisals under some model.
#[derive(Debug, Clone, PartialEq)]
pub struct SurprisalSample {
    pub observations: Points,
    pub surprisals: Vec<f64>,
    pub model_description: String,
}

impl SurprisalSample {
    /// Pairs precomputed surprisals with their observations, e.g. for
    /// conditional models where every observation has its own distribution.
    pub fn from_parts(
        observations: Points,
        surprisals: Vec<f64>,
        model_description: impl Into<String>,
    ) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InsufficientData {
                what: "observations",
                needed: 1,
                got: 0,
            });
        }
        if observations.len() != surprisals.len() {
            return Err(invalid(format!(
                "{} observations but {} surprisals",
                observations.len(),
                surprisals.len()
            )));
        }
        if surprisals.iter().any(|s| s.is_nan()) {
            return Err(invalid("surprisal is NaN"));
        }
        Ok(Self {
            observations,
            surprisals,
            model_description: model_description.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.surprisals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surprisals.is_empty()
    }
}

/// `-log f(y)` for every point. Points outside the support get `+inf`.
pub fn compute_surprisals(model: &DistributionModel, data: &Points) -> Result<SurprisalSample> {
    model.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData {
            what: "observations",
            needed: 1,
            got: 0,
        });
    }
    if data.dim() != model.arity() {
        return Err(Error::ArityMismatch {
            expected: model.arity(),
            got: data.dim(),
        });
    }
    let surprisals: Vec<f64> = data.iter().map(|y| -model.log_density_unchecked(y)).collect();
    if surprisals.iter().any(|s| s.is_nan()) {
        return Err(invalid("observation contains NaN"));
    }
    Ok(SurprisalSample {
        observations: data.clone(),
        surprisals,
        model_description: model.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TailMethod {
    Assumed,
    Empirical,
    Gpd,
}

impl std::fmt::Display for TailMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TailMethod::Assumed => "assumed",
            TailMethod::Empirical => "empirical",
            TailMethod::Gpd => "gpd",
        })
    }
}

impl std::str::FromStr for TailMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "assumed" => Ok(TailMethod::Assumed),
            "empirical" => Ok(TailMethod::Empirical),
            "gpd" => Ok(TailMethod::Gpd),
            other => Err(invalid(format!(
                "unknown estimator `{other}` (expected assumed, empirical or gpd)"
            ))),
        }
    }
}

/// What the estimator used, beyond the probabilities themselves.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TailParams {
    Assumed { model: String },
    Empirical { n: usize },
    Gpd(GpdFit),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate {
    pub probs: Vec<f64>,
    pub method: TailMethod,
    pub params: TailParams,
}

/// How `Pr(S >= s)` is estimated.
#[derive(Debug, Clone, PartialEq)]
pub enum TailEstimator {
    /// From the model that produced the surprisals.
    Assumed(DistributionModel),
    /// Proportion of surprisals at least as large.
    Empirical,
    /// Peaks over threshold on the top `beta` fraction.
    Gpd { beta: f64 },
}

impl TailEstimator {
    pub fn method(&self) -> TailMethod {
        match self {
            TailEstimator::Assumed(_) => TailMethod::Assumed,
            TailEstimator::Empirical => TailMethod::Empirical,
            TailEstimator::Gpd { .. } => TailMethod::Gpd,
        }
    }

    pub fn estimate(&self, surprisals: &[f64]) -> Result<TailEstimate> {
        match self {
            TailEstimator::Assumed(model) => Ok(assumed_estimate(model, surprisals)),
            TailEstimator::Empirical => empirical_estimate(surprisals),
            TailEstimator::Gpd { beta } => gpd_estimate(surprisals, *beta),
        }
    }
}

pub fn assumed_estimate(model: &DistributionModel, surprisals: &[f64]) -> TailEstimate {
    let tail = AssumedTail::new(model);
    TailEstimate {
        probs: surprisals.iter().map(|&s| tail.prob(s)).collect(),
        method: TailMethod::Assumed,
        params: TailParams::Assumed {
            model: model.to_string(),
        },
    }
}

/// Assumed-model probabilities when observation `i` has its own model.
pub fn assumed_estimate_conditional(
    models: &[DistributionModel],
    surprisals: &[f64],
) -> Result<TailEstimate> {
    if models.len() != surprisals.len() {
        return Err(invalid(format!(
            "{} models for {} surprisals",
            models.len(),
            surprisals.len()
        )));
    }
    let probs = models
        .iter()
        .zip(surprisals)
        .map(|(m, &s)| AssumedTail::new(m).prob(s))
        .collect();
    Ok(TailEstimate {
        probs,
        method: TailMethod::Assumed,
        params: TailParams::Assumed {
            model: "conditional".into(),
        },
    })
}

pub fn empirical_estimate(surprisals: &[f64]) -> Result<TailEstimate> {
    Ok(TailEstimate {
        probs: empirical::tail_probs(surprisals)?,
        method: TailMethod::Empirical,
        params: TailParams::Empirical {
            n: surprisals.len(),
        },
    })
}

pub fn gpd_estimate(surprisals: &[f64], beta: f64) -> Result<TailEstimate> {
    let fit = GpdFit::fit_tail(surprisals, beta)?;
    Ok(TailEstimate {
        probs: fit.tail_probs(surprisals),
        method: TailMethod::Gpd,
        params: TailParams::Gpd(fit),
    })
}

/// Indices whose tail probability is below `alpha`, plus the filter that
/// was applied afterwards, if any.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnomalyReport {
    pub flagged: Vec<usize>,
    pub alpha: f64,
    pub group_filter: Option<GroupFilter>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupFilter {
    pub min_count: usize,
    /// Number of groups with enough flags to survive.
    pub groups_kept: usize,
    /// Indices that were flagged but dropped by the filter.
    pub removed: Vec<usize>,
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Flags `i` iff `probs[i] < alpha` (strictly).
pub fn flag_anomalies(estimate: &TailEstimate, alpha: f64) -> Result<AnomalyReport> {
    flag_probs(&estimate.probs, alpha)
}

pub fn flag_probs(probs: &[f64], alpha: f64) -> Result<AnomalyReport> {
    check_alpha(alpha)?;
    Ok(AnomalyReport {
        flagged: probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p < alpha)
            .map(|(i, _)| i)
            .collect(),
        alpha,
        group_filter: None,
    })
}

/// Keeps a flag only if its group holds at least `min_count` flags.
pub fn group_filter<K, F>(report: &AnomalyReport, group_of: F, min_count: usize) -> Result<AnomalyReport>
where
    K: Hash + Eq,
    F: Fn(usize) -> K,
{
    if min_count == 0 {
        return Err(invalid("min_count must be at least 1"));
    }
    let keys: Vec<K> = report.flagged.iter().map(|&i| group_of(i)).collect();
    let mut counts: HashMap<&K, usize> = HashMap::new();
    for k in &keys {
        *counts.entry(k).or_default() += 1;
    }
    let (mut flagged, mut removed) = (Vec::new(), Vec::new());
    for (&i, k) in report.flagged.iter().zip(&keys) {
        if counts[k] >= min_count {
            flagged.push(i);
        } else {
            removed.push(i);
        }
    }
    Ok(AnomalyReport {
        flagged,
        alpha: report.alpha,
        group_filter: Some(GroupFilter {
            min_count,
            groups_kept: counts.values().filter(|&&c| c >= min_count).count(),
            removed,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::special::normal_two_sided;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn estimate(probs: Vec<f64>) -> TailEstimate {
        TailEstimate {
            probs,
            method: TailMethod::Empirical,
            params: TailParams::Empirical { n: 0 },
        }
    }

    #[test]
    fn surprisal_examples() {
        let n = DistributionModel::normal(0.0, 1.0).unwrap();
        let s = compute_surprisals(&n, &Points::scalars(vec![0.0])).unwrap();
        assert_relative_eq!(s.surprisals[0], 0.918_938_533_204_672_7, epsilon = 1e-15);

        let g = DistributionModel::gamma(2.0, 2.0).unwrap();
        let s = compute_surprisals(&g, &Points::scalars(vec![1.0, -1.0])).unwrap();
        assert_relative_eq!(s.surprisals[0], 0.613_705_638_880_109_3, epsilon = 1e-14);
        assert_eq!(s.surprisals[1], f64::INFINITY);

        let b = DistributionModel::binomial(265, 0.148).unwrap();
        let s = compute_surprisals(&b, &Points::scalars(vec![114.0])).unwrap();
        assert_relative_eq!(s.surprisals[0], 63.901_639_925_014_77, epsilon = 1e-9);
    }

    #[test]
    fn surprisals_recompute_bit_for_bit() {
        let m = DistributionModel::student_t(3.0, 0.5, 2.0).unwrap();
        let data = m.sample(200, 1).unwrap();
        let s = compute_surprisals(&m, &data).unwrap();
        for (y, &si) in data.iter().zip(&s.surprisals) {
            assert_eq!(si.to_bits(), (-m.log_density(y).unwrap()).to_bits());
        }
    }

    #[test]
    fn arity_is_checked() {
        let m = DistributionModel::normal(0.0, 1.0).unwrap();
        let pts = Points::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            compute_surprisals(&m, &pts),
            Err(Error::ArityMismatch { expected: 1, got: 2 })
        ));
        assert!(compute_surprisals(&m, &Points::scalars(vec![])).is_err());
    }

    #[test]
    fn flag_examples() {
        let r = flag_anomalies(&estimate(vec![1.0, 0.005, 0.02]), 0.01).unwrap();
        assert_eq!(r.flagged, vec![1]);
        assert!(flag_anomalies(&estimate(vec![1.0; 5]), 0.5).unwrap().flagged.is_empty());
        // strict inequality
        assert!(flag_probs(&[0.01], 0.01).unwrap().flagged.is_empty());
        assert!(flag_probs(&[0.5], 1.5).is_err());
        assert!(flag_probs(&[0.5], 0.0).is_err());
    }

    #[test]
    fn group_filter_examples() {
        let r = flag_probs(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0], 0.5).unwrap();
        let groups = ["a", "a", "a", "b", "b", "b"];
        let f = group_filter(&r, |i| groups[i], 3).unwrap();
        assert_eq!(f.flagged, vec![3, 4, 5]);
        assert_eq!(f.group_filter.as_ref().unwrap().removed, vec![0, 1]);
        assert_eq!(group_filter(&r, |i| groups[i], 1).unwrap().flagged, r.flagged);
        assert!(group_filter(&r, |i| groups[i], 0).is_err());
    }

    #[test]
    fn normal_assumed_matches_z_test() {
        let m = DistributionModel::normal(1.0, 2.0).unwrap();
        let data = m.sample(2000, 3).unwrap();
        let s = compute_surprisals(&m, &data).unwrap();
        let e = TailEstimator::Assumed(m).estimate(&s.surprisals).unwrap();
        for (y, p) in data.iter().zip(&e.probs) {
            assert!((p - normal_two_sided((y[0] - 1.0) / 2.0)).abs() <= 1e-9);
        }
    }

    #[test]
    fn infinite_surprisal_always_flagged() {
        let mut s: Vec<f64> = (0..300).map(|i| i as f64 / 100.0).collect();
        s.push(f64::INFINITY);
        let g = DistributionModel::gamma(2.0, 2.0).unwrap();
        for est in [
            TailEstimator::Empirical,
            TailEstimator::Gpd { beta: 0.1 },
            TailEstimator::Assumed(g),
        ] {
            let e = est.estimate(&s).unwrap();
            assert_eq!(e.probs[300], 0.0, "{:?}", e.method);
            assert!(flag_anomalies(&e, 1e-6).unwrap().flagged.contains(&300));
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in [TailMethod::Assumed, TailMethod::Empirical, TailMethod::Gpd] {
            assert_eq!(m.to_string().parse::<TailMethod>().unwrap(), m);
        }
        assert!("median".parse::<TailMethod>().is_err());
    }

    proptest! {
        #[test]
        fn estimators_are_monotone_in_surprisal(seed in 0u64..1000) {
            let m = DistributionModel::gamma(2.0, 2.0).unwrap();
            let data = m.sample(400, seed).unwrap();
            let s = compute_surprisals(&m, &data).unwrap().surprisals;
            for est in [TailEstimator::Assumed(m.clone()), TailEstimator::Empirical,
                        TailEstimator::Gpd { beta: 0.1 }] {
                let p = est.estimate(&s).unwrap().probs;
                for i in 0..s.len() {
                    prop_assert!((0.0..=1.0).contains(&p[i]));
                    for j in 0..s.len() {
                        if s[i] >= s[j] {
                            prop_assert!(p[i] <= p[j] + 1e-15);
                        }
                    }
                }
            }
        }

        #[test]
        fn group_filter_only_removes(flags in prop::collection::vec(any::<bool>(), 1..60),
                                     groups in prop::collection::vec(0u8..5, 60),
                                     min_count in 1usize..5) {
            let probs: Vec<f64> = flags.iter().map(|&f| if f { 0.0 } else { 1.0 }).collect();
            let r = flag_probs(&probs, 0.5).unwrap();
            let f = group_filter(&r, |i| groups[i], min_count).unwrap();
            prop_assert!(f.flagged.iter().all(|i| r.flagged.contains(i)));
            prop_assert_eq!(f.flagged.len() + f.group_filter.unwrap().removed.len(), r.flagged.len());
        }
    }
}
