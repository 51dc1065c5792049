//! Tail probabilities `Pr(S >= s)` computed from the assumed model itself.
//!
//! Closed forms cover the Normal, Student-t, Gamma and Binomial families and
//! products of Normals (a chi-square in disguise). Any other product falls
//! back to a seeded Monte-Carlo reference sample of surprisals.

use std::f64::consts::PI;

use crate::distributions::special::{beta_inc, erfc, gamma_p, gamma_q};
use crate::distributions::{binomial_log_pmf, student_t_log_norm, DistributionModel};
use crate::empirical::EcdfTail;
use crate::rng::seeded;

pub const DEFAULT_REFERENCE_SIZE: usize = 200_000;
const REFERENCE_SEED: u64 = 0x5eed_5eed;

/// `Pr(S >= s)` under one model.
#[derive(Debug, Clone)]
pub struct AssumedTail {
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Normal { log_norm: f64 },
    StudentT { nu: f64, log_norm: f64 },
    Gamma { shape: f64, rate: f64 },
    Binomial { log_pmf: Vec<f64> },
    ChiSquare { dof: f64, offset: f64 },
    Reference(EcdfTail),
}

impl AssumedTail {
    pub fn new(model: &DistributionModel) -> Self {
        Self::with_reference_size(model, DEFAULT_REFERENCE_SIZE)
    }

    /// As [`AssumedTail::new`], choosing the Monte-Carlo reference size used
    /// when no closed form exists.
    pub fn with_reference_size(model: &DistributionModel, reference_size: usize) -> Self {
        let kind = match *model {
            DistributionModel::Normal { sigma, .. } => Kind::Normal {
                log_norm: (sigma * (2.0 * PI).sqrt()).ln(),
            },
            DistributionModel::StudentT { nu, scale, .. } => Kind::StudentT {
                nu,
                log_norm: student_t_log_norm(nu) - scale.ln(),
            },
            DistributionModel::Gamma { shape, rate } => Kind::Gamma { shape, rate },
            DistributionModel::Binomial { trials, prob } => Kind::Binomial {
                log_pmf: (0..=trials)
                    .map(|k| binomial_log_pmf(trials, prob, k as f64))
                    .collect(),
            },
            DistributionModel::IndependentProduct(ref parts) => {
                let normals: Option<Vec<f64>> = parts
                    .iter()
                    .map(|p| match *p {
                        DistributionModel::Normal { sigma, .. } => Some(sigma),
                        _ => None,
                    })
                    .collect();
                match normals {
                    Some(sigmas) => Kind::ChiSquare {
                        dof: sigmas.len() as f64,
                        offset: sigmas.iter().map(|s| (s * (2.0 * PI).sqrt()).ln()).sum(),
                    },
                    None => {
                        let mut rng = seeded(REFERENCE_SEED);
                        let pts = model.sample_with(reference_size.max(1), &mut rng);
                        let s: Vec<f64> =
                            pts.iter().map(|y| -model.log_density_unchecked(y)).collect();
                        Kind::Reference(EcdfTail::new(&s).expect("model surprisals are not NaN"))
                    }
                }
            }
        };
        Self { kind }
    }

    /// Probability of a surprisal at least as large as `s`.
    pub fn prob(&self, s: f64) -> f64 {
        if s == f64::INFINITY {
            return 0.0;
        }
        match self.kind {
            Kind::Normal { log_norm } => {
                if s <= log_norm {
                    1.0
                } else {
                    erfc((s - log_norm).sqrt())
                }
            }
            Kind::StudentT { nu, log_norm } => {
                // s = -log_norm + (nu+1)/2 * ln(1 + t²/nu)
                let u = 2.0 * (s + log_norm) / (nu + 1.0);
                if u <= 0.0 {
                    1.0
                } else {
                    beta_inc(0.5 * nu, 0.5, (-u).exp())
                }
            }
            Kind::Gamma { shape, rate } => gamma_tail(shape, rate, s),
            Kind::Binomial { ref log_pmf } => {
                let cut = -s + 1e-10 * s.abs().max(1.0);
                let p: f64 = log_pmf
                    .iter()
                    .filter(|&&lp| lp <= cut)
                    .map(|lp| lp.exp())
                    .sum();
                p.min(1.0)
            }
            Kind::ChiSquare { dof, offset } => {
                if s <= offset {
                    1.0
                } else {
                    gamma_q(0.5 * dof, s - offset)
                }
            }
            Kind::Reference(ref ecdf) => ecdf.tail_prob(s),
        }
    }
}

fn gamma_tail(shape: f64, rate: f64, s: f64) -> f64 {
    let neg_log_f = |y: f64| -> f64 {
        -(shape * rate.ln() + (shape - 1.0) * y.ln() - rate * y
            - crate::distributions::special::ln_gamma(shape))
    };
    if shape == 1.0 {
        // f(y) = rate e^{-rate y}, decreasing from `rate`
        let y = (s + rate.ln()) / rate;
        return if y <= 0.0 { 1.0 } else { (-rate * y).exp() };
    }
    if shape < 1.0 {
        // decreasing density: the region is [y*, inf)
        let y = solve_increasing(|y| neg_log_f(y) - s, 0.0, 1.0 / rate);
        return gamma_q(shape, rate * y);
    }
    let mode = (shape - 1.0) / rate;
    if s <= neg_log_f(mode) {
        return 1.0;
    }
    let lo = solve_increasing(|y| s - neg_log_f(y), 0.0, mode);
    let hi = solve_increasing(|y| neg_log_f(y) - s, mode, mode + 1.0 / rate);
    gamma_p(shape, rate * lo) + gamma_q(shape, rate * hi)
}

/// Root of an increasing function on `(lo, inf)`, starting from the guess
/// `hi`; the bracket is grown until it changes sign.
fn solve_increasing(g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let mut step = hi - lo;
    while g(b) < 0.0 {
        a = b;
        step *= 2.0;
        b += step;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::special::normal_two_sided;
    use approx::assert_relative_eq;

    fn model(text: &str) -> DistributionModel {
        text.parse().unwrap()
    }

    #[test]
    fn normal_matches_two_sided_z() {
        let m = model("normal(2,3)");
        let tail = AssumedTail::new(&m);
        for y in [-7.0, 0.0, 1.9, 2.0, 2.5, 8.3, 14.0] {
            let s = -m.log_density_at(y).unwrap();
            assert_relative_eq!(tail.prob(s), normal_two_sided((y - 2.0) / 3.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn student_t_matches_two_sided_tail() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        let m = model("t(nu=4,loc=1,scale=2)");
        let oracle = StudentsT::new(0.0, 1.0, 4.0).unwrap();
        let tail = AssumedTail::new(&m);
        for y in [1.0, 3.0, 7.0, -9.0, 41.0] {
            let s = -m.log_density_at(y).unwrap();
            let z: f64 = (y - 1.0) / 2.0;
            assert_relative_eq!(tail.prob(s), 2.0 * oracle.cdf(-z.abs()), epsilon = 1e-11);
        }
    }

    #[test]
    fn gamma_tail_against_numeric_region() {
        // brute force: integrate f over {f <= e^-s} on a fine grid
        for (shape, rate) in [(2.0, 2.0), (0.5, 1.0), (1.0, 3.0), (5.0, 0.7)] {
            let m = DistributionModel::gamma(shape, rate).unwrap();
            let tail = AssumedTail::new(&m);
            for y0 in [0.05, 0.4, 1.3, 4.0] {
                let s = -m.log_density_at(y0).unwrap();
                let h = 1e-4;
                let mut acc = 0.0;
                let mut y = h / 2.0;
                while y < 200.0 / rate {
                    let lf = m.log_density_at(y).unwrap();
                    if lf <= -s {
                        acc += lf.exp() * h;
                    }
                    y += h;
                }
                assert!((tail.prob(s) - acc).abs() < 2e-3, "shape={shape} y0={y0}: {} vs {acc}", tail.prob(s));
            }
        }
    }

    #[test]
    fn binomial_counts_ties_inclusively() {
        // symmetric pmf: k and n-k have equal surprisal
        let m = model("binomial(10,0.5)");
        let tail = AssumedTail::new(&m);
        let s = -m.log_density_at(0.0).unwrap();
        assert_relative_eq!(tail.prob(s), 2.0 / 1024.0, epsilon = 1e-15);
        let s_mode = -m.log_density_at(5.0).unwrap();
        assert_relative_eq!(tail.prob(s_mode), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn normal_product_is_chi_square() {
        let m = model("product(normal(1,0.7071067811865476),normal(1,0.7071067811865476))");
        let tail = AssumedTail::new(&m);
        // compare against the Monte-Carlo reference route
        let mc = AssumedTail {
            kind: {
                let pts = m.sample(400_000, 11).unwrap();
                let s: Vec<f64> = pts.iter().map(|y| -m.log_density(y).unwrap()).collect();
                Kind::Reference(EcdfTail::new(&s).unwrap())
            },
        };
        for y in [[1.0, 1.0], [1.5, 0.2], [2.9, 1.1], [-0.6, 2.2]] {
            let s = -m.log_density(&y).unwrap();
            assert!((tail.prob(s) - mc.prob(s)).abs() < 3e-3);
        }
    }

    #[test]
    fn infinite_surprisal_has_zero_tail() {
        for text in ["normal(0,1)", "gamma(2,2)", "binomial(4,0.2)"] {
            assert_eq!(AssumedTail::new(&model(text)).prob(f64::INFINITY), 0.0);
        }
    }
}
