//! Empirical surprisal tail probabilities and the DKW confidence band.

use crate::distributions::DistributionModel;
use crate::error::{invalid, Error, Result};
use crate::rng::{replicate, stream};

/// Sorted surprisals; answers "what fraction is at least this large".
#[derive(Debug, Clone, PartialEq)]
pub struct EcdfTail {
    sorted: Vec<f64>,
}

impl EcdfTail {
    pub fn new(surprisals: &[f64]) -> Result<Self> {
        if surprisals.is_empty() {
            return Err(Error::InsufficientData {
                what: "surprisals",
                needed: 1,
                got: 0,
            });
        }
        if surprisals.iter().any(|s| s.is_nan()) {
            return Err(invalid("surprisal is NaN"));
        }
        let mut sorted = surprisals.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// `#{j : s_j >= s} / n`. Ties count inclusively, so an observation
    /// always counts itself.
    pub fn tail_prob(&self, s: f64) -> f64 {
        let below = self.sorted.partition_point(|&x| x < s);
        (self.sorted.len() - below) as f64 / self.sorted.len() as f64
    }

    /// Empirical CDF `#{j : s_j <= s} / n`.
    pub fn cdf(&self, s: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= s) as f64 / self.sorted.len() as f64
    }

    /// Left limit `#{j : s_j < s} / n`.
    pub fn cdf_left(&self, s: f64) -> f64 {
        self.sorted.partition_point(|&x| x < s) as f64 / self.sorted.len() as f64
    }
}

/// Per-observation empirical tail probabilities. Infinite surprisals get 0.
pub fn tail_probs(surprisals: &[f64]) -> Result<Vec<f64>> {
    let ecdf = EcdfTail::new(surprisals)?;
    Ok(surprisals
        .iter()
        .map(|&s| {
            if s == f64::INFINITY {
                0.0
            } else {
                ecdf.tail_prob(s)
            }
        })
        .collect())
}

/// Half-width of the uniform DKW band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DkwBand {
    pub epsilon: f64,
    pub alpha: f64,
    pub n: usize,
}

impl DkwBand {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        Ok(Self {
            epsilon: dkw_epsilon(n, alpha)?,
            alpha,
            n,
        })
    }

    /// `[P̂_n(s) - ε, P̂_n(s) + ε]`, clipped to `[0, 1]`.
    pub fn interval(&self, ecdf_value: f64) -> (f64, f64) {
        (
            (ecdf_value - self.epsilon).max(0.0),
            (ecdf_value + self.epsilon).min(1.0),
        )
    }
}

/// `ε = sqrt(log(2/α) / (2n))`.
pub fn dkw_epsilon(n: usize, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("DKW band needs n >= 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt())
}

/// `sup_s |P̂_n(s) - G(s)|` for an arbitrary (possibly discrete) reference
/// distribution given through its CDF and left-limit CDF.
pub fn sup_distance(
    sample: &EcdfTail,
    g: impl Fn(f64) -> f64,
    g_left: impl Fn(f64) -> f64,
) -> f64 {
    let xs = sample.sorted();
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut below = 0usize;
    let mut i = 0;
    while i < xs.len() {
        let v = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == v {
            j += 1;
        }
        // P̂ is below/n on [prev, v) and j/n at v
        d = d
            .max((below as f64 / n - g_left(v)).abs())
            .max((j as f64 / n - g(v)).abs());
        below = j;
        i = j;
    }
    d
}

pub const DEFAULT_ORACLE_DRAWS: usize = 1_000_000;

/// Fraction of `reps` seeded replications in which the whole empirical CDF
/// of `n` surprisals stays inside the DKW band around the true surprisal CDF.
/// The true CDF is represented by a 10⁶-draw reference sample.
pub fn band_coverage_check(
    model: &DistributionModel,
    n: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    band_coverage_with_oracle(model, n, alpha, reps, seed, DEFAULT_ORACLE_DRAWS)
}

pub fn band_coverage_with_oracle(
    model: &DistributionModel,
    n: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
    oracle_draws: usize,
) -> Result<f64> {
    if reps < 100 {
        return Err(invalid(format!("coverage check needs reps >= 100, got {reps}")));
    }
    model.validate()?;
    let band = DkwBand::new(n, alpha)?;
    let surprisals = |pts: crate::distributions::Points| -> Vec<f64> {
        pts.iter().map(|y| -model.log_density_unchecked(y)).collect()
    };
    let mut oracle_rng = stream(seed, u64::MAX);
    let oracle = EcdfTail::new(&surprisals(model.sample_with(oracle_draws, &mut oracle_rng)))?;

    let covered = replicate(reps, |r| {
        let mut rng = stream(seed, r as u64);
        let ecdf = EcdfTail::new(&surprisals(model.sample_with(n, &mut rng)))
            .expect("nonempty sample");
        sup_distance(&ecdf, |s| oracle.cdf(s), |s| oracle.cdf_left(s)) <= band.epsilon
    });
    Ok(covered.iter().filter(|&&c| c).count() as f64 / reps as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn tail_prob_examples() {
        let e = EcdfTail::new(&[1.0, 2.0, 2.0, 3.0]).unwrap();
        assert_eq!(e.tail_prob(2.0), 0.75);
        assert_eq!(e.tail_prob(1.0), 1.0);
        assert_eq!(e.tail_prob(3.0), 0.25);
        assert_eq!(e.tail_prob(3.5), 0.0);
        assert_eq!(e.tail_prob(-10.0), 1.0);

        let distinct = EcdfTail::new(&[0.3, 5.0, 1.2, 9.9, 4.4]).unwrap();
        assert_eq!(distinct.tail_prob(9.9), 1.0 / 5.0);
    }

    #[test]
    fn empty_rejected() {
        assert!(EcdfTail::new(&[]).is_err());
        assert!(EcdfTail::new(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn infinite_surprisal_probability_zero() {
        let p = tail_probs(&[1.0, f64::INFINITY, 2.0]).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 2.0 / 3.0]);
    }

    #[test]
    fn dkw_epsilon_values() {
        // sqrt(ln 40 / 2000)
        assert_relative_eq!(dkw_epsilon(1000, 0.05).unwrap(), 0.042_946_940_834_673_76, epsilon = 1e-15);
        let ratio = dkw_epsilon(2000, 0.05).unwrap() / dkw_epsilon(1000, 0.05).unwrap();
        assert_relative_eq!(ratio, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-14);
        assert!(dkw_epsilon(100, 2.0).is_err());
        assert!(dkw_epsilon(100, 0.0).is_err());
        assert!(dkw_epsilon(0, 0.5).is_err());
    }

    #[test]
    fn sup_distance_matches_ks_formula_for_continuous_reference() {
        let xs = [0.1, 0.35, 0.5, 0.9];
        let e = EcdfTail::new(&xs).unwrap();
        let d = sup_distance(&e, |s| s.clamp(0.0, 1.0), |s| s.clamp(0.0, 1.0));
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / 4.0 - x).max(x - i as f64 / 4.0))
            .fold(0.0, f64::max);
        assert_relative_eq!(d, ks, epsilon = 1e-15);
    }

    #[test]
    fn sup_distance_discrete_reference() {
        // reference: point masses 0.5 at 0 and 1; sample all zeros
        let e = EcdfTail::new(&[0.0, 0.0]).unwrap();
        let g = |s: f64| if s < 0.0 { 0.0 } else if s < 1.0 { 0.5 } else { 1.0 };
        let g_left = |s: f64| if s <= 0.0 { 0.0 } else if s <= 1.0 { 0.5 } else { 1.0 };
        assert_relative_eq!(sup_distance(&e, g, g_left), 0.5);
    }

    #[test]
    fn coverage_needs_enough_reps() {
        let m = DistributionModel::normal(0.0, 1.0).unwrap();
        assert!(band_coverage_with_oracle(&m, 50, 0.05, 10, 1, 1000).is_err());
    }

    #[test]
    fn coverage_at_loose_alpha() {
        let m = DistributionModel::normal(0.0, 1.0).unwrap();
        let cov = band_coverage_with_oracle(&m, 200, 0.5, 300, 4, 200_000).unwrap();
        let se = (0.5f64 * 0.5 / 300.0).sqrt();
        assert!(cov >= 0.5 - 3.0 * se, "{cov}");
    }

    #[test]
    fn coverage_for_discrete_surprisals() {
        let m = DistributionModel::binomial(10, 0.5).unwrap();
        let cov = band_coverage_with_oracle(&m, 300, 0.1, 200, 8, 200_000).unwrap();
        let se = (0.1f64 * 0.9 / 200.0).sqrt();
        assert!(cov >= 0.9 - 3.0 * se, "{cov}");
    }

    proptest! {
        #[test]
        fn rank_invariance(values in prop::collection::vec(-5.0..5.0f64, 1..200)) {
            let base = EcdfTail::new(&values).unwrap();
            let maps: [fn(f64) -> f64; 3] = [|s| 2.0 * s + 1.0, f64::exp, |s| s * s * s];
            for map in maps {
                let mapped: Vec<f64> = values.iter().map(|&s| map(s)).collect();
                let other = EcdfTail::new(&mapped).unwrap();
                for (&s, &t) in values.iter().zip(&mapped) {
                    prop_assert_eq!(base.tail_prob(s).to_bits(), other.tail_prob(t).to_bits());
                }
            }
        }

        #[test]
        fn tail_is_nonincreasing_step(values in prop::collection::vec(-1e3..1e3f64, 1..100),
                                     a in -1.5e3..1.5e3f64, b in -1.5e3..1.5e3f64) {
            let e = EcdfTail::new(&values).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(e.tail_prob(lo) >= e.tail_prob(hi));
            let k = e.tail_prob(a) * values.len() as f64;
            prop_assert!((k - k.round()).abs() < 1e-9);
        }
    }
}
