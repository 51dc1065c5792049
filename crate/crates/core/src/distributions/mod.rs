//! Parametric models with generalized densities.
//!
//! A [`DistributionModel`] supplies `log f(y)` for continuous and discrete
//! families, draws seeded samples, and (for scalar continuous families)
//! evaluates its distribution function. Points are passed as coordinate
//! slices so that scalar and product models share one interface; a
//! [`Points`] buffer stores many of them contiguously.

mod parse;
pub mod special;

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Normal, StudentT};

use crate::error::{invalid, Error, Result};
use crate::rng::seeded;

pub use parse::{ModelSpec, Param};
pub use special::{normal_cdf, normal_quantile, normal_sf};

/// The assumed distribution `F`.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionModel {
    Normal { mu: f64, sigma: f64 },
    StudentT { nu: f64, loc: f64, scale: f64 },
    Gamma { shape: f64, rate: f64 },
    /// Independent coordinates; the density is the product of the components'.
    IndependentProduct(Vec<DistributionModel>),
    Binomial { trials: u64, prob: f64 },
}

impl DistributionModel {
    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::Normal { mu, sigma }.validated()
    }

    pub fn student_t(nu: f64, loc: f64, scale: f64) -> Result<Self> {
        Self::StudentT { nu, loc, scale }.validated()
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        Self::Gamma { shape, rate }.validated()
    }

    pub fn product(components: Vec<DistributionModel>) -> Result<Self> {
        Self::IndependentProduct(components).validated()
    }

    pub fn binomial(trials: u64, prob: f64) -> Result<Self> {
        Self::Binomial { trials, prob }.validated()
    }

    /// Checks the parameter invariants, returning the model unchanged if they hold.
    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be finite and > 0, got {v}")))
            }
        }
        fn finite(name: &str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be finite, got {v}")))
            }
        }
        match *self {
            Self::Normal { mu, sigma } => {
                finite("mu", mu)?;
                positive("sigma", sigma)
            }
            Self::StudentT { nu, loc, scale } => {
                positive("nu", nu)?;
                finite("loc", loc)?;
                positive("scale", scale)
            }
            Self::Gamma { shape, rate } => {
                positive("shape", shape)?;
                positive("rate", rate)
            }
            Self::IndependentProduct(ref parts) => {
                if parts.is_empty() {
                    return Err(invalid("product needs at least one component"));
                }
                parts.iter().try_for_each(|p| p.validate())
            }
            Self::Binomial { prob, .. } => {
                if (0.0..=1.0).contains(&prob) {
                    Ok(())
                } else {
                    Err(invalid(format!("prob must lie in [0, 1], got {prob}")))
                }
            }
        }
    }

    /// Number of coordinates in a point.
    pub fn arity(&self) -> usize {
        match self {
            Self::IndependentProduct(parts) => parts.iter().map(|p| p.arity()).sum(),
            _ => 1,
        }
    }

    pub fn is_discrete(&self) -> bool {
        match self {
            Self::Binomial { .. } => true,
            Self::IndependentProduct(parts) => parts.iter().all(|p| p.is_discrete()),
            _ => false,
        }
    }

    /// `log f(y)`; `-inf` outside the support.
    pub fn log_density(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.arity() {
            return Err(Error::ArityMismatch {
                expected: self.arity(),
                got: y.len(),
            });
        }
        Ok(self.log_density_unchecked(y))
    }

    /// Scalar shortcut for single-coordinate models.
    pub fn log_density_at(&self, y: f64) -> Result<f64> {
        self.log_density(std::slice::from_ref(&y))
    }

    pub(crate) fn log_density_unchecked(&self, y: &[f64]) -> f64 {
        match *self {
            Self::Normal { mu, sigma } => {
                let z = (y[0] - mu) / sigma;
                -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * PI).ln()
            }
            Self::StudentT { nu, loc, scale } => {
                let z = (y[0] - loc) / scale;
                student_t_log_norm(nu) - scale.ln() - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p()
            }
            Self::Gamma { shape, rate } => gamma_log_pdf(shape, rate, y[0]),
            Self::IndependentProduct(ref parts) => {
                let mut offset = 0;
                let mut total = 0.0;
                for part in parts {
                    let k = part.arity();
                    total += part.log_density_unchecked(&y[offset..offset + k]);
                    offset += k;
                }
                total
            }
            Self::Binomial { trials, prob } => binomial_log_pmf(trials, prob, y[0]),
        }
    }

    /// Distribution function for scalar continuous models; `None` otherwise.
    pub fn cdf(&self, x: f64) -> Option<f64> {
        match *self {
            Self::Normal { mu, sigma } => Some(normal_cdf((x - mu) / sigma)),
            Self::StudentT { nu, loc, scale } => Some(student_t_cdf(nu, (x - loc) / scale)),
            Self::Gamma { shape, rate } => Some(special::gamma_p(shape, rate * x)),
            _ => None,
        }
    }

    /// `n` iid draws, deterministic given `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Points> {
        if n == 0 {
            return Err(invalid("sample size must be positive"));
        }
        self.validate()?;
        let mut rng = seeded(seed);
        Ok(self.sample_with(n, &mut rng))
    }

    /// Draws from a caller-owned generator. Parameters are assumed valid.
    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Points {
        let dim = self.arity();
        let mut values = Vec::with_capacity(n * dim);
        let mut point = vec![0.0; dim];
        for _ in 0..n {
            self.draw_into(rng, &mut point);
            values.extend_from_slice(&point);
        }
        Points { dim, values }
    }

    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match *self {
            Self::Normal { mu, sigma } => {
                out[0] = Normal::new(mu, sigma).expect("validated").sample(rng);
            }
            Self::StudentT { nu, loc, scale } => {
                let t = StudentT::new(nu).expect("validated").sample(rng);
                out[0] = loc + scale * t;
            }
            Self::Gamma { shape, rate } => {
                out[0] = Gamma::new(shape, 1.0 / rate).expect("validated").sample(rng);
            }
            Self::Binomial { trials, prob } => {
                out[0] = Binomial::new(trials, prob).expect("validated").sample(rng) as f64;
            }
            Self::IndependentProduct(ref parts) => {
                let mut offset = 0;
                for part in parts {
                    let k = part.arity();
                    part.draw_into(rng, &mut out[offset..offset + k]);
                    offset += k;
                }
            }
        }
    }
}

impl fmt::Display for DistributionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Normal { mu, sigma } => write!(f, "normal(mu={mu},sigma={sigma})"),
            Self::StudentT { nu, loc, scale } => {
                write!(f, "t(nu={nu},loc={loc},scale={scale})")
            }
            Self::Gamma { shape, rate } => write!(f, "gamma(shape={shape},rate={rate})"),
            Self::Binomial { trials, prob } => {
                write!(f, "binomial(trials={trials},prob={prob})")
            }
            Self::IndependentProduct(parts) => {
                f.write_str("product(")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl std::str::FromStr for DistributionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelSpec::parse(s)?.build(&|_| None)
    }
}

pub(crate) fn student_t_log_norm(nu: f64) -> f64 {
    use special::ln_gamma;
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln()
}

/// CDF of the standard Student-t.
pub(crate) fn student_t_cdf(nu: f64, t: f64) -> f64 {
    let x = nu / (nu + t * t);
    let half_tail = 0.5 * special::beta_inc(0.5 * nu, 0.5, x);
    if t < 0.0 {
        half_tail
    } else {
        1.0 - half_tail
    }
}

fn gamma_log_pdf(shape: f64, rate: f64, y: f64) -> f64 {
    if y < 0.0 {
        return f64::NEG_INFINITY;
    }
    if y == 0.0 {
        // limit of the density at the boundary
        return if shape == 1.0 {
            rate.ln()
        } else if shape > 1.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        };
    }
    shape * rate.ln() + (shape - 1.0) * y.ln() - rate * y - special::ln_gamma(shape)
}

pub(crate) fn binomial_log_pmf(trials: u64, prob: f64, y: f64) -> f64 {
    if y < 0.0 || y.fract() != 0.0 || y > trials as f64 {
        return f64::NEG_INFINITY;
    }
    let k = y;
    let n = trials as f64;
    let term = |count: f64, p: f64| -> f64 {
        // 0 * log(0) = 0
        if count == 0.0 {
            0.0
        } else {
            count * p.ln()
        }
    };
    use special::ln_gamma;
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
        + term(k, prob)
        + if n - k == 0.0 {
            0.0
        } else {
            (n - k) * (-prob).ln_1p()
        }
}

/// Contiguous storage for `len` points of equal arity.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    values: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::ArityMismatch {
                expected: dim,
                got: values.len() % dim.max(1),
            });
        }
        Ok(Self { dim, values })
    }

    /// One coordinate per point.
    pub fn scalars(values: Vec<f64>) -> Self {
        Self { dim: 1, values }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(1, |r| r.len());
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::ArityMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(dim, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    /// Flat coordinate buffer (row-major).
    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_density_examples() {
        let n = DistributionModel::normal(0.0, 1.0).unwrap();
        assert_relative_eq!(n.log_density_at(0.0).unwrap(), -0.918_938_533_204_672_7, epsilon = 1e-14);

        let g = DistributionModel::gamma(2.0, 2.0).unwrap();
        assert_relative_eq!(g.log_density_at(1.0).unwrap(), -0.613_705_638_880_109_3, epsilon = 1e-13);

        let t = DistributionModel::student_t(4.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(t.log_density_at(0.0).unwrap(), -0.980_829_253_011_726_2, epsilon = 1e-13);

        let p = DistributionModel::product(vec![g.clone(), g]).unwrap();
        assert_relative_eq!(
            p.log_density(&[1.0, 1.0]).unwrap(),
            2.0 * -0.613_705_638_880_109_3,
            epsilon = 1e-13
        );
    }

    #[test]
    fn support_edges() {
        let g = DistributionModel::gamma(2.0, 2.0).unwrap();
        assert_eq!(g.log_density_at(-1.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(g.log_density_at(0.0).unwrap(), f64::NEG_INFINITY);
        let e = DistributionModel::gamma(1.0, 3.0).unwrap();
        assert_relative_eq!(e.log_density_at(0.0).unwrap(), 3.0_f64.ln());

        let b = DistributionModel::binomial(10, 0.3).unwrap();
        assert_eq!(b.log_density_at(11.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(b.log_density_at(2.5).unwrap(), f64::NEG_INFINITY);
        assert!(b.log_density_at(3.0).unwrap().is_finite());

        let degenerate = DistributionModel::binomial(0, 0.4).unwrap();
        assert_eq!(degenerate.log_density_at(0.0).unwrap(), 0.0);
        let certain = DistributionModel::binomial(5, 1.0).unwrap();
        assert_eq!(certain.log_density_at(5.0).unwrap(), 0.0);
        assert_eq!(certain.log_density_at(4.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn arity_mismatch_is_an_error() {
        let g = DistributionModel::gamma(2.0, 2.0).unwrap();
        let p = DistributionModel::product(vec![g.clone(), g]).unwrap();
        assert!(matches!(
            p.log_density(&[1.0]),
            Err(Error::ArityMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn invalid_parameters_rejected_at_construction() {
        assert!(DistributionModel::normal(0.0, 0.0).is_err());
        assert!(DistributionModel::normal(f64::NAN, 1.0).is_err());
        assert!(DistributionModel::student_t(-1.0, 0.0, 1.0).is_err());
        assert!(DistributionModel::gamma(2.0, -2.0).is_err());
        assert!(DistributionModel::binomial(3, 1.5).is_err());
        assert!(DistributionModel::product(vec![]).is_err());
    }

    #[test]
    fn binomial_pmf_sums_to_one() {
        for (n, p) in [(10u64, 0.5), (50, 0.13), (265, 0.148), (1, 0.9)] {
            let m = DistributionModel::binomial(n, p).unwrap();
            let total: f64 = (0..=n)
                .map(|k| m.log_density_at(k as f64).unwrap().exp())
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "n={n} p={p}: {total}");
        }
    }

    #[test]
    fn continuous_densities_integrate_to_one() {
        // composite Simpson on a wide grid
        let models = [
            (DistributionModel::normal(0.3, 1.7).unwrap(), -30.0, 30.0),
            (DistributionModel::student_t(4.0, 0.0, 1.0).unwrap(), -4000.0, 4000.0),
            (DistributionModel::gamma(2.0, 2.0).unwrap(), 0.0, 60.0),
            (DistributionModel::gamma(3.5, 0.5).unwrap(), 0.0, 200.0),
        ];
        for (m, lo, hi) in models {
            let steps = 2_000_000;
            let h = (hi - lo) / steps as f64;
            let f = |x: f64| m.log_density_at(x).unwrap().exp();
            let mut acc = f(lo) + f(hi);
            for i in 1..steps {
                let x = lo + i as f64 * h;
                acc += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
            }
            let integral = acc * h / 3.0;
            // t(4) tails beyond ±4000 carry ~1e-13 of the mass
            assert!((integral - 1.0).abs() < 1e-6, "{m}: {integral}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = DistributionModel::student_t(4.0, 1.0, 2.0).unwrap();
        assert_eq!(m.sample(100, 9).unwrap(), m.sample(100, 9).unwrap());
        assert_ne!(m.sample(100, 9).unwrap(), m.sample(100, 10).unwrap());
    }

    #[test]
    fn normal_sample_mean() {
        let m = DistributionModel::normal(0.0, 1.0).unwrap();
        let pts = m.sample(100_000, 3).unwrap();
        let mean = pts.as_flat().iter().sum::<f64>() / 1e5;
        assert!(mean.abs() < 0.02, "{mean}");
    }

    #[test]
    fn degenerate_binomial_sample() {
        let m = DistributionModel::binomial(0, 0.7).unwrap();
        assert!(m.sample(7, 1).unwrap().as_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn samples_pass_kolmogorov_smirnov() {
        let n = 100_000;
        // 0.001-level asymptotic critical value
        let crit = 1.949_5 / (n as f64).sqrt();
        let models = [
            DistributionModel::normal(-1.0, 2.0).unwrap(),
            DistributionModel::student_t(4.0, 0.5, 1.5).unwrap(),
            DistributionModel::gamma(2.0, 2.0).unwrap(),
        ];
        for (i, m) in models.iter().enumerate() {
            let mut xs = m.sample(n, 100 + i as u64).unwrap().as_flat().to_vec();
            xs.sort_by(f64::total_cmp);
            let d = xs
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    let c = m.cdf(x).unwrap();
                    (c - k as f64 / n as f64).max((k + 1) as f64 / n as f64 - c)
                })
                .fold(0.0, f64::max);
            assert!(d < crit, "{m}: D={d} crit={crit}");
        }
    }

    #[test]
    fn cdf_against_statrs() {
        use statrs::distribution::{ContinuousCDF, Gamma as SGamma, StudentsT};
        let t = StudentsT::new(0.0, 1.0, 3.5).unwrap();
        let g = SGamma::new(2.5, 1.5).unwrap();
        for i in -50..=50 {
            let x = i as f64 * 0.2;
            assert!((student_t_cdf(3.5, x) - t.cdf(x)).abs() < 1e-12);
            if x > 0.0 {
                let ours = DistributionModel::gamma(2.5, 1.5).unwrap().cdf(x).unwrap();
                assert!((ours - g.cdf(x)).abs() < 1e-12);
            }
        }
    }
}
