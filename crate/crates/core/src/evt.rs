//! Monte-Carlo checks of the extreme-value behaviour of the maximum
//! surprisal `M_n = max(s_1, ..., s_n)`.
//!
//! Three moment regimes are covered: sub-Gaussian `S` (bounded log-density),
//! sub-exponential `S` (e.g. Gaussian data) and `S` with only a polynomial
//! moment. For each, finite-sample tail bounds on `M_n - E[S]` are compared
//! with simulated frequencies, allowing three binomial standard errors of
//! Monte-Carlo slack.

use serde::Serialize;

use crate::distributions::{normal_quantile, normal_sf, DistributionModel};
use crate::error::{invalid, Result};
use crate::rng::{replicate, stream};

pub const MIN_REPS: usize = 500;
pub const ORACLE_DRAWS: usize = 1_000_000;
/// Allowed Monte-Carlo slack, in binomial standard errors.
pub const MC_SLACK: f64 = 3.0;

/// Simulation design plus the regime constants the bounds need.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxSurprisalStudy {
    pub model: DistributionModel,
    pub n: usize,
    pub reps: usize,
    /// `E[S]`, the entropy of the model.
    pub entropy: f64,
    /// Sub-Gaussian / sub-exponential variance proxy `ν`.
    pub nu: Option<f64>,
    /// Sub-exponential scale: the MGF bound holds for `|λ| < 1/b`.
    pub b: Option<f64>,
    /// Moment constant with `E|S - E[S]|^p <= C^p`.
    pub c: Option<f64>,
    pub p_order: Option<f64>,
}

impl MaxSurprisalStudy {
    pub fn new(model: DistributionModel, n: usize, reps: usize, entropy: f64) -> Result<Self> {
        model.validate()?;
        if reps < MIN_REPS {
            return Err(invalid(format!("study needs reps >= {MIN_REPS}, got {reps}")));
        }
        if n == 0 {
            return Err(invalid("study needs n >= 1"));
        }
        if !entropy.is_finite() {
            return Err(invalid("entropy must be finite"));
        }
        Ok(Self {
            model,
            n,
            reps,
            entropy,
            nu: None,
            b: None,
            c: None,
            p_order: None,
        })
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = Some(nu);
        self
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = Some(b);
        self
    }

    pub fn with_moment(mut self, c: f64, p_order: f64) -> Self {
        self.c = Some(c);
        self.p_order = Some(p_order);
        self
    }

    fn need(value: Option<f64>, name: &str, bound: TailBound) -> Result<f64> {
        match value {
            Some(v) if v > 0.0 && v.is_finite() => Ok(v),
            Some(v) => Err(invalid(format!("{name} must be finite and > 0, got {v}"))),
            None => Err(invalid(format!("{bound:?} bound needs the regime constant {name}"))),
        }
    }
}

/// Surprisals of `draws` samples from a stream reserved for oracles.
fn oracle_surprisals(model: &DistributionModel, draws: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, u64::MAX - 1);
    model
        .sample_with(draws, &mut rng)
        .iter()
        .map(|y| -model.log_density_unchecked(y))
        .collect()
}

/// Monte-Carlo `E[S]`.
pub fn entropy_oracle(model: &DistributionModel, draws: usize, seed: u64) -> Result<f64> {
    model.validate()?;
    if draws == 0 {
        return Err(invalid("oracle needs at least one draw"));
    }
    let s = oracle_surprisals(model, draws, seed);
    Ok(mean(&s))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// `log` of the sample mean of `exp(λ d_i)`, computed stably.
fn log_mgf(centered: &[f64], lambda: f64) -> f64 {
    let top = centered
        .iter()
        .map(|&d| lambda * d)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = centered.iter().map(|&d| (lambda * d - top).exp()).sum();
    top + (sum / centered.len() as f64).ln()
}

/// `sup_λ 2 log M(λ) / λ²` over a symmetric grid on `[-lambda_max, lambda_max]`
/// (endpoints excluded when `open`), where `M` is the sample MGF of `S - E[S]`.
fn nu_squared_on_grid(centered: &[f64], lambda_max: f64, open: bool) -> f64 {
    const STEPS: usize = 400;
    let mut best: f64 = 0.0;
    for i in 1..=STEPS {
        if open && i == STEPS {
            break;
        }
        let lambda = lambda_max * i as f64 / STEPS as f64;
        for l in [lambda, -lambda] {
            best = best.max(2.0 * log_mgf(centered, l) / (l * l));
        }
    }
    best
}

/// Sub-Gaussian variance proxy `ν`: the smallest `ν` with
/// `E exp(λ(S - E S)) <= exp(λ²ν²/2)` on `|λ| <= lambda_max`, from the sample MGF.
pub fn subgaussian_nu_oracle(
    model: &DistributionModel,
    draws: usize,
    seed: u64,
    lambda_max: f64,
) -> Result<f64> {
    model.validate()?;
    if !(lambda_max > 0.0) {
        return Err(invalid("lambda_max must be > 0"));
    }
    let s = oracle_surprisals(model, draws, seed);
    let es = mean(&s);
    let centered: Vec<f64> = s.iter().map(|v| v - es).collect();
    Ok(nu_squared_on_grid(&centered, lambda_max, false).sqrt())
}

/// Sub-exponential constants `(ν, b)`.
///
/// `b` comes from a radius probe: `λ` is raised in steps of 0.005 until the
/// relative standard error of the Monte-Carlo MGF exceeds 0.001, which
/// happens once `exp(λ(S - E S))` loses its second moment; `b` is the
/// reciprocal of the last stable `λ`. `ν` is then the sup of
/// `2 log M(λ)/λ²` over `|λ| < 1/b`.
pub fn subexponential_oracle(
    model: &DistributionModel,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    model.validate()?;
    let s = oracle_surprisals(model, draws, seed);
    let es = mean(&s);
    let centered: Vec<f64> = s.iter().map(|v| v - es).collect();
    let n = centered.len() as f64;
    let rse = |lambda: f64| {
        let top = centered.iter().map(|&d| lambda * d).fold(f64::NEG_INFINITY, f64::max);
        let (mut m1, mut m2) = (0.0, 0.0);
        for &d in &centered {
            let e = (lambda * d - top).exp();
            m1 += e;
            m2 += e * e;
        }
        m1 /= n;
        m2 /= n;
        ((m2 - m1 * m1).max(0.0) / n).sqrt() / m1
    };
    let step = 0.005;
    let mut last_stable = None;
    let mut lambda = step;
    while lambda <= 50.0 {
        if rse(lambda) > 0.001 {
            break;
        }
        last_stable = Some(lambda);
        lambda += step;
    }
    let lambda_star = last_stable.ok_or_else(|| {
        invalid("MGF of the surprisal is unstable at every probed lambda")
    })?;
    let b = 1.0 / lambda_star;
    let nu = nu_squared_on_grid(&centered, lambda_star, false).sqrt();
    Ok((nu, b))
}

/// `C = (E|S - E S|^p)^{1/p}` from a Monte-Carlo moment.
pub fn moment_constant_oracle(
    model: &DistributionModel,
    p_order: f64,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    model.validate()?;
    if !(p_order >= 1.0) {
        return Err(invalid(format!("moment order must be >= 1, got {p_order}")));
    }
    let s = oracle_surprisals(model, draws, seed);
    let es = mean(&s);
    let m = s.iter().map(|v| (v - es).abs().powf(p_order)).sum::<f64>() / s.len() as f64;
    Ok(m.powf(1.0 / p_order))
}

/// `reps` independent values of `M_n - E[S]`.
pub fn simulate_max_distribution(study: &MaxSurprisalStudy, seed: u64) -> Vec<f64> {
    let model = &study.model;
    let n = study.n;
    let entropy = study.entropy;
    replicate(study.reps, |r| {
        let mut rng = stream(seed, r as u64);
        let pts = model.sample_with(n, &mut rng);
        pts.iter()
            .map(|y| -model.log_density_unchecked(y))
            .fold(f64::NEG_INFINITY, f64::max)
            - entropy
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TailBound {
    /// `Pr(M_n - ES >= s) <= 1 - (1 - exp(-s²/2ν²))^n`, `s > 0`.
    SubGaussian,
    /// As above for `s <= ν²/b`, `1 - (1 - exp(-s/2b))^n` beyond; the grid
    /// must satisfy `s > ν²/b`.
    SubExponential,
    /// `Pr(|M_n - ES| >= s) <= 1 - (1 - C^p/s^p)^n`, `s > C`.
    Polynomial,
}

impl std::str::FromStr for TailBound {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subgaussian" => Ok(Self::SubGaussian),
            "subexponential" => Ok(Self::SubExponential),
            "polynomial" => Ok(Self::Polynomial),
            other => Err(invalid(format!(
                "unknown bound `{other}` (expected subgaussian, subexponential or polynomial)"
            ))),
        }
    }
}

/// One grid point of a bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub s: f64,
    /// Threshold actually applied to `M_n - E[S]` (equals `s` for the
    /// unscaled bounds).
    pub threshold: f64,
    pub empirical_prob: f64,
    pub bound: f64,
    pub pass: bool,
}

fn one_minus_pow(q: f64, n: usize) -> f64 {
    // 1 - (1 - q)^n without cancellation for small q
    if q >= 1.0 {
        1.0
    } else {
        -(n as f64 * (-q).ln_1p()).exp_m1()
    }
}

fn judge(s: f64, threshold: f64, hits: usize, reps: usize, bound: f64) -> BoundCheck {
    let empirical = hits as f64 / reps as f64;
    let b = bound.clamp(0.0, 1.0);
    let se = (b * (1.0 - b) / reps as f64).sqrt();
    BoundCheck {
        s,
        threshold,
        empirical_prob: empirical,
        bound,
        pass: empirical <= bound + MC_SLACK * se,
    }
}

/// Checks one of the finite-sample bounds on simulated centered maxima.
pub fn check_tail_bound_on(
    maxima: &[f64],
    study: &MaxSurprisalStudy,
    bound: TailBound,
    s_grid: &[f64],
) -> Result<Vec<BoundCheck>> {
    let n = study.n;
    let reps = maxima.len();
    if reps == 0 {
        return Err(invalid("no simulated maxima"));
    }
    let mut out = Vec::with_capacity(s_grid.len());
    match bound {
        TailBound::SubGaussian => {
            let nu = MaxSurprisalStudy::need(study.nu, "nu", bound)?;
            for &s in s_grid {
                if !(s > 0.0) {
                    return Err(invalid(format!("sub-Gaussian bound needs s > 0, got {s}")));
                }
                let q = (-0.5 * s * s / (nu * nu)).exp();
                let hits = maxima.iter().filter(|&&m| m >= s).count();
                out.push(judge(s, s, hits, reps, one_minus_pow(q, n)));
            }
        }
        TailBound::SubExponential => {
            let nu = MaxSurprisalStudy::need(study.nu, "nu", bound)?;
            let b = MaxSurprisalStudy::need(study.b, "b", bound)?;
            for &s in s_grid {
                if !(s > nu * nu / b) {
                    return Err(invalid(format!(
                        "sub-exponential bound needs s > nu²/b = {}, got {s}",
                        nu * nu / b
                    )));
                }
                let q = (-s / (2.0 * b)).exp();
                let hits = maxima.iter().filter(|&&m| m >= s).count();
                out.push(judge(s, s, hits, reps, one_minus_pow(q, n)));
            }
        }
        TailBound::Polynomial => {
            let c = MaxSurprisalStudy::need(study.c, "C", bound)?;
            let p = MaxSurprisalStudy::need(study.p_order, "p", bound)?;
            for &s in s_grid {
                if !(s > c) {
                    return Err(invalid(format!("polynomial bound needs s > C = {c}, got {s}")));
                }
                let q = (c / s).powf(p);
                let hits = maxima.iter().filter(|&&m| m.abs() >= s).count();
                out.push(judge(s, s, hits, reps, one_minus_pow(q, n)));
            }
        }
    }
    Ok(out)
}

/// Simulates the study and checks `bound` on `s_grid`.
pub fn check_tail_bound(
    study: &MaxSurprisalStudy,
    bound: TailBound,
    s_grid: &[f64],
    seed: u64,
) -> Result<Vec<BoundCheck>> {
    // fail fast on missing constants before simulating
    check_tail_bound_on(&[0.0], study, bound, s_grid)?;
    let maxima = simulate_max_distribution(study, seed);
    check_tail_bound_on(&maxima, study, bound, s_grid)
}

/// The `n`-scaled forms of the bounds, for two-sided deviations:
///
/// * sub-Gaussian: `Pr(|M_n - ES| >= √(2ν²s) + √(2ν² log 2n)) <= e^{-s}`;
/// * sub-exponential: `Pr(|M_n - ES| >= 2bs + 2b log 2n) <= 1 - (1 - e^{-s}/n)^n`;
/// * polynomial: `Pr(|M_n - ES| >= C s n^{1/p}) <= 1 - (1 - s^{-p}/n)^n`.
pub fn check_scaled_bound_on(
    maxima: &[f64],
    study: &MaxSurprisalStudy,
    bound: TailBound,
    s_grid: &[f64],
) -> Result<Vec<BoundCheck>> {
    let n = study.n;
    let reps = maxima.len();
    if reps == 0 {
        return Err(invalid("no simulated maxima"));
    }
    let log2n = (2.0 * n as f64).ln();
    let mut out = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        if !(s > 0.0) {
            return Err(invalid(format!("scaled bounds need s > 0, got {s}")));
        }
        let (threshold, limit) = match bound {
            TailBound::SubGaussian => {
                let nu = MaxSurprisalStudy::need(study.nu, "nu", bound)?;
                let v2 = 2.0 * nu * nu;
                ((v2 * s).sqrt() + (v2 * log2n).sqrt(), (-s).exp())
            }
            TailBound::SubExponential => {
                let b = MaxSurprisalStudy::need(study.b, "b", bound)?;
                (2.0 * b * (s + log2n), one_minus_pow((-s).exp() / n as f64, n))
            }
            TailBound::Polynomial => {
                let c = MaxSurprisalStudy::need(study.c, "C", bound)?;
                let p = MaxSurprisalStudy::need(study.p_order, "p", bound)?;
                (
                    c * s * (n as f64).powf(1.0 / p),
                    one_minus_pow(s.powf(-p) / n as f64, n),
                )
            }
        };
        let hits = maxima.iter().filter(|&&m| m.abs() >= threshold).count();
        out.push(judge(s, threshold, hits, reps, limit));
    }
    Ok(out)
}

/// Norming constants `(a_n, b_n)` for the maximum surprisal of a univariate
/// Normal model, so that `(M_n - E[S] - b_n) / a_n` is approximately
/// standard Gumbel.
///
/// With `S - E[S] = (Z² - 1)/2`, `b_n` solves `n Pr(S - E[S] > b_n) = 1` and
/// `a_n` is the reciprocal hazard rate at `b_n`.
pub fn normal_max_norming(n: usize) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(invalid("norming needs n >= 2"));
    }
    let x = normal_quantile(1.0 - 0.5 / n as f64)?;
    let b_n = 0.5 * (x * x - 1.0);
    let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let a_n = normal_sf(x) * x / phi;
    Ok((a_n, b_n))
}

/// Kolmogorov distance between the empirical CDF of `(v - loc)/scale` and
/// the standard Gumbel CDF `exp(-exp(-x))`.
pub fn gumbel_ks_distance(values: &[f64], loc: f64, scale: f64) -> f64 {
    let mut z: Vec<f64> = values.iter().map(|v| (v - loc) / scale).collect();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    z.iter()
        .enumerate()
        .map(|(i, &x)| {
            let g = (-(-x).exp()).exp();
            ((i + 1) as f64 / n - g).max(g - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// The three reference studies: Binomial(10, 1/2) for the sub-Gaussian
/// bound, N(0, 1) for the sub-exponential one and t(4) with `p = 4` for
/// the polynomial one. Regime constants come from the oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeStudy {
    pub study: MaxSurprisalStudy,
    pub bound: TailBound,
    /// Grid for the unscaled bound.
    pub s_grid: Vec<f64>,
    /// Grid for the `n`-scaled form.
    pub scaled_grid: Vec<f64>,
}

pub const POLYNOMIAL_ORDER: f64 = 4.0;

impl RegimeStudy {
    pub fn new(bound: TailBound, n: usize, reps: usize, seed: u64) -> Result<Self> {
        Self::with_oracle_draws(bound, n, reps, seed, ORACLE_DRAWS)
    }

    pub fn with_oracle_draws(
        bound: TailBound,
        n: usize,
        reps: usize,
        seed: u64,
        draws: usize,
    ) -> Result<Self> {
        let model = match bound {
            TailBound::SubGaussian => DistributionModel::binomial(10, 0.5)?,
            TailBound::SubExponential => DistributionModel::normal(0.0, 1.0)?,
            TailBound::Polynomial => DistributionModel::student_t(4.0, 0.0, 1.0)?,
        };
        let entropy = entropy_oracle(&model, draws, seed)?;
        let base = MaxSurprisalStudy::new(model, n, reps, entropy)?;
        let scaled_grid = vec![0.5, 1.0, 2.0];
        Ok(match bound {
            TailBound::SubGaussian => {
                let nu = subgaussian_nu_oracle(&base.model, draws, seed, 10.0)?;
                Self {
                    study: base.with_nu(nu),
                    bound,
                    s_grid: vec![1.0, 2.0, 4.0],
                    scaled_grid,
                }
            }
            TailBound::SubExponential => {
                let (nu, b) = subexponential_oracle(&base.model, draws, seed)?;
                let floor = nu * nu / b;
                Self {
                    study: base.with_nu(nu).with_b(b),
                    bound,
                    s_grid: [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
                        .into_iter()
                        .filter(|&s| s > floor)
                        .collect(),
                    scaled_grid,
                }
            }
            TailBound::Polynomial => {
                let c = moment_constant_oracle(&base.model, POLYNOMIAL_ORDER, draws, seed)?;
                let scale = c * (n as f64).powf(1.0 / POLYNOMIAL_ORDER);
                Self {
                    study: base.with_moment(c, POLYNOMIAL_ORDER),
                    bound,
                    s_grid: [1.0, 2.0, 4.0].iter().map(|k| k * scale).collect(),
                    scaled_grid: vec![1.0, 2.0, 4.0],
                }
            }
        })
    }

    /// Simulates once and checks both the finite-sample bound and its scaled form.
    pub fn run(&self, seed: u64) -> Result<(Vec<BoundCheck>, Vec<BoundCheck>)> {
        let maxima = simulate_max_distribution(&self.study, seed);
        Ok((
            check_tail_bound_on(&maxima, &self.study, self.bound, &self.s_grid)?,
            check_scaled_bound_on(&maxima, &self.study, self.bound, &self.scaled_grid)?,
        ))
    }
}
