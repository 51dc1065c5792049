//! Unusually high not-out counts among batters.
//!
//! Not-outs given innings are modelled as `Binomial(innings, p(innings))`
//! with a smooth `p`; surprisals of the observed counts are ranked through
//! a GPD tail fit.

use std::io::Read;

use serde::Serialize;

use crate::apps::{field, parse_field, read_table};
use crate::conditional::{binomial_surprisals, fit_binomial_smooth, BinomialSmoothFit};
use crate::error::{invalid, Error, Result};
use crate::gpd::{GpdFit, DEFAULT_BETA};
use crate::surprisal::{flag_probs, AnomalyReport};

#[derive(Debug, Clone, PartialEq)]
pub struct CricketRecord {
    pub player: String,
    pub innings: u64,
    pub notouts: u64,
}

/// Reads `player, innings, notouts` rows.
pub fn read_cricket_csv<R: Read>(reader: R) -> Result<Vec<CricketRecord>> {
    let table = read_table(reader, &["player", "innings", "notouts"])?;
    let (p, i, n) = (table.columns[0], table.columns[1], table.columns[2]);
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        let innings: u64 = parse_field(rec, i, *line, "innings")?;
        let notouts: u64 = parse_field(rec, n, *line, "notouts")?;
        if notouts > innings {
            return Err(Error::MalformedRow {
                line: *line,
                reason: format!("{notouts} not-outs exceed {innings} innings"),
            });
        }
        out.push(CricketRecord {
            player: field(rec, p, *line, "player")?.to_string(),
            innings,
            notouts,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CricketConfig {
    pub beta: f64,
    pub alpha: f64,
}

impl Default for CricketConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            alpha: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CricketRow {
    pub rank: usize,
    pub player: String,
    pub innings: u64,
    pub notouts: u64,
    pub expected_notouts: f64,
    pub fitted_prob: f64,
    pub surprisal: f64,
    pub p: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CricketResult {
    pub total_notouts: u64,
    pub total_innings: u64,
    /// Batters without an innings carry no information and are skipped.
    pub dropped_zero_innings: usize,
    pub smooth: BinomialSmoothFit,
    pub gpd: GpdFit,
    /// All batters, most anomalous first.
    pub ranked: Vec<CricketRow>,
    /// Indices into `ranked`'s source order (records with innings > 0).
    pub report: AnomalyReport,
}

impl CricketResult {
    pub fn pooled_proportion(&self) -> f64 {
        self.total_notouts as f64 / self.total_innings as f64
    }
}

pub fn run_cricket(records: &[CricketRecord], config: &CricketConfig) -> Result<CricketResult> {
    crate::surprisal::check_alpha(config.alpha)?;
    let kept: Vec<&CricketRecord> = records.iter().filter(|r| r.innings > 0).collect();
    let dropped = records.len() - kept.len();
    if kept.is_empty() {
        return Err(invalid("no batter has any innings"));
    }
    let innings: Vec<u64> = kept.iter().map(|r| r.innings).collect();
    let notouts: Vec<u64> = kept.iter().map(|r| r.notouts).collect();
    let smooth = fit_binomial_smooth(&innings, &notouts)?;
    let sample = binomial_surprisals(&smooth, &innings, &notouts)?;
    let gpd = GpdFit::fit_tail(&sample.surprisals, config.beta)?;
    let probs = gpd.tail_probs(&sample.surprisals);
    let report = flag_probs(&probs, config.alpha)?;

    let mut order: Vec<usize> = (0..kept.len()).collect();
    order.sort_by(|&a, &b| {
        probs[a]
            .total_cmp(&probs[b])
            .then(sample.surprisals[b].total_cmp(&sample.surprisals[a]))
            .then(a.cmp(&b))
    });
    let ranked = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            let r = kept[i];
            let p_hat = smooth.fitted_prob(r.innings as f64);
            CricketRow {
                rank: rank + 1,
                player: r.player.clone(),
                innings: r.innings,
                notouts: r.notouts,
                expected_notouts: r.innings as f64 * p_hat,
                fitted_prob: p_hat,
                surprisal: sample.surprisals[i],
                p: probs[i],
                flagged: probs[i] < config.alpha,
            }
        })
        .collect();
    Ok(CricketResult {
        total_notouts: notouts.iter().sum(),
        total_innings: innings.iter().sum(),
        dropped_zero_innings: dropped,
        smooth,
        gpd,
        ranked,
        report,
    })
}

pub fn run_cricket_csv<R: Read>(reader: R, config: &CricketConfig) -> Result<CricketResult> {
    run_cricket(&read_cricket_csv(reader)?, config)
}
