//! Browser bindings for three interactive views: tail-probability curves
//! under model misspecification, a peaks-over-threshold explorer, and a
//! Hampel series explorer. Every export returns a JSON string.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use surprisal::assumed::AssumedTail;
use surprisal::conditional::{hampel_tau_from_alpha, HampelModel};
use surprisal::empirical::EcdfTail;
use surprisal::error::Error;
use surprisal::simulation::{default_y_grid, run_expt_univariate, ExperimentConfig};
use surprisal::{compute_surprisals, DistributionModel, GpdFit, Result};

/// Upper limit on replications so a click stays interactive.
pub const MAX_DEMO_REPS: usize = 200;

#[derive(Debug, Serialize)]
struct Series {
    label: String,
    p: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct TailCurves {
    y: Vec<f64>,
    p_true: Vec<f64>,
    series: Vec<Series>,
}

/// Average estimated `Pr(S >= s(y))` across `reps` samples of size `n`,
/// for Normal or t(4) truth scored under both models.
pub fn tail_curves_json(truth: &str, n: usize, reps: usize, seed: u64) -> Result<String> {
    let truth_is_t = match truth {
        "normal" => false,
        "t4" => true,
        other => return Err(Error::InvalidParameter(format!("unknown truth `{other}`"))),
    };
    let mut config = ExperimentConfig::univariate_default(truth_is_t, reps.clamp(1, MAX_DEMO_REPS), seed);
    config.n_grid = vec![n];
    let grid = default_y_grid();
    let rows = run_expt_univariate(&config, &grid)?;
    let mut out = TailCurves {
        p_true: grid
            .iter()
            .map(|&y| rows.iter().find(|r| r.y == y).map_or(f64::NAN, |r| r.p_true))
            .collect(),
        y: grid,
        series: Vec::new(),
    };
    for r in &rows {
        let label = format!("{} {}", r.distribution_used, r.estimator);
        match out.series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.p.push(r.p_estimate),
            None => out.series.push(Series { label, p: vec![r.p_estimate] }),
        }
    }
    Ok(serde_json::to_string(&out).expect("plain data serializes"))
}

#[derive(Debug, Serialize)]
struct GpdView {
    fit: GpdFit,
    /// `(s, empirical Pr(S >= s))` for the upper part of the sample.
    empirical: Vec<[f64; 2]>,
    /// `(s, p)` along the fitted tail and under the assumed model.
    grid: Vec<f64>,
    gpd: Vec<f64>,
    assumed: Vec<f64>,
}

/// Samples `n` points from `model_spec`, fits a GPD to the top `beta`
/// fraction of their surprisals and returns both tail estimates next to
/// the model's own tail probability.
pub fn gpd_explorer_json(model_spec: &str, n: usize, beta: f64, seed: u64) -> Result<String> {
    let model: DistributionModel = model_spec.parse()?;
    let data = model.sample(n, seed)?;
    let s = compute_surprisals(&model, &data)?.surprisals;
    let fit = GpdFit::fit_tail(&s, beta)?;
    let ecdf = EcdfTail::new(&s)?;
    let sorted = ecdf.sorted();
    let keep = ((3.0 * beta * n as f64).ceil() as usize).min(sorted.len());
    let empirical = sorted[sorted.len() - keep..]
        .iter()
        .filter(|v| v.is_finite())
        .map(|&v| [v, ecdf.tail_prob(v)])
        .collect();
    let top = sorted.iter().rev().copied().find(|v| v.is_finite()).unwrap_or(fit.threshold_u);
    let hi = top + 0.5 * (top - fit.threshold_u).max(1.0);
    let grid: Vec<f64> = (0..=120)
        .map(|i| fit.threshold_u + (hi - fit.threshold_u) * i as f64 / 120.0)
        .collect();
    let tail = AssumedTail::new(&model);
    let view = GpdView {
        gpd: grid.iter().map(|&v| fit.tail_prob(v)).collect(),
        assumed: grid.iter().map(|&v| tail.prob(v)).collect(),
        fit,
        empirical,
        grid,
    };
    Ok(serde_json::to_string(&view).expect("plain data serializes"))
}

#[derive(Debug, Serialize)]
struct HampelView {
    y: Vec<f64>,
    median: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    p: Vec<f64>,
    flagged: Vec<usize>,
    tau: f64,
}

fn parse_series(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, t)| {
            t.parse().map_err(|_| Error::MalformedRow {
                line: i as u64 + 1,
                reason: format!("`{t}` is not a number"),
            })
        })
        .collect()
}

/// Hampel surprisals for a comma- or whitespace-separated series, with the
/// band `median ± τσ` matching level `alpha`.
pub fn hampel_explorer_json(values: &str, half_window: usize, alpha: f64) -> Result<String> {
    let y = parse_series(values)?;
    let tau = hampel_tau_from_alpha(alpha)?;
    let series = HampelModel::new(half_window).surprisals(&y)?;
    let est = series.assumed_estimate();
    let view = HampelView {
        lower: series.medians.iter().zip(&series.sigmas).map(|(m, s)| m - tau * s).collect(),
        upper: series.medians.iter().zip(&series.sigmas).map(|(m, s)| m + tau * s).collect(),
        flagged: est
            .probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p < alpha)
            .map(|(i, _)| i)
            .collect(),
        median: series.medians,
        p: est.probs,
        y,
        tau,
    };
    Ok(serde_json::to_string(&view).expect("plain data serializes"))
}

fn to_js(r: Result<String>) -> std::result::Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn tail_curves(truth: &str, n: usize, reps: usize, seed: u32) -> std::result::Result<String, JsValue> {
    to_js(tail_curves_json(truth, n, reps, seed as u64))
}

#[wasm_bindgen]
pub fn gpd_explorer(model_spec: &str, n: usize, beta: f64, seed: u32) -> std::result::Result<String, JsValue> {
    to_js(gpd_explorer_json(model_spec, n, beta, seed as u64))
}

#[wasm_bindgen]
pub fn hampel_explorer(values: &str, half_window: usize, alpha: f64) -> std::result::Result<String, JsValue> {
    to_js(hampel_explorer_json(values, half_window, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn tail_curves_have_one_value_per_grid_point() {
        let v: Value = serde_json::from_str(&tail_curves_json("normal", 500, 3, 1).unwrap()).unwrap();
        let n = v["y"].as_array().unwrap().len();
        assert_eq!(n, 21);
        assert_eq!(v["p_true"].as_array().unwrap().len(), n);
        let series = v["series"].as_array().unwrap();
        assert_eq!(series.len(), 6);
        assert!(series.iter().all(|s| s["p"].as_array().unwrap().len() == n));
        assert!(tail_curves_json("cauchy", 500, 3, 1).is_err());
    }

    #[test]
    fn gpd_view_is_consistent() {
        let v: Value = serde_json::from_str(&gpd_explorer_json("t(nu=4)", 2000, 0.1, 3).unwrap()).unwrap();
        assert_eq!(v["fit"]["n_exceed"], 200);
        let gpd = v["gpd"].as_array().unwrap();
        assert!((gpd[0].as_f64().unwrap() - 0.1).abs() < 1e-12);
        assert!(gpd.windows(2).all(|w| w[1].as_f64() <= w[0].as_f64()));
        assert!(gpd_explorer_json("normal(", 100, 0.1, 1).is_err());
    }

    #[test]
    fn hampel_view_flags_spike() {
        let mut vals: Vec<String> = (0..60).map(|i| format!("{}", (i % 7) as f64 * 0.1)).collect();
        vals[30] = "9".into();
        let v: Value = serde_json::from_str(&hampel_explorer_json(&vals.join(","), 5, 0.01).unwrap()).unwrap();
        assert!(v["flagged"].as_array().unwrap().contains(&Value::from(30)));
        assert!(hampel_explorer_json("1, x, 3", 2, 0.01).is_err());
    }
}
