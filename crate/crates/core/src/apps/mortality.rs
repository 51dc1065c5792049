//! Anomalous years in age- and sex-specific mortality rates.
//!
//! Each (sex, age) series of log-rates is scored with the Hampel model, the
//! surprisals are pooled per sex for a GPD tail fit, and flags survive only
//! when enough ages are flagged in the same year for the same sex.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::Serialize;

use crate::apps::{field, parse_field, read_table};
use crate::conditional::HampelModel;
use crate::error::{invalid, Error, Result};
use crate::gpd::{GpdFit, DEFAULT_BETA};
use crate::rng::replicate;
use crate::surprisal::{flag_probs, group_filter, AnomalyReport};

#[derive(Debug, Clone, PartialEq)]
pub struct MortalityRecord {
    pub year: i32,
    pub age: u32,
    pub sex: String,
    pub rate: f64,
}

fn is_missing(v: &str) -> bool {
    v.is_empty() || v == "." || v.eq_ignore_ascii_case("na") || v.eq_ignore_ascii_case("nan")
}

/// Reads `year, age, sex, mortality_rate` rows. Empty, `.` or `NA` rates
/// are reported together as missing data.
pub fn read_mortality_csv<R: Read>(reader: R) -> Result<Vec<MortalityRecord>> {
    let table = read_table(reader, &["year", "age", "sex", "mortality_rate"])?;
    let (y, a, s, r) = (table.columns[0], table.columns[1], table.columns[2], table.columns[3]);
    let mut out = Vec::with_capacity(table.rows.len());
    let mut missing = Vec::new();
    for (line, rec) in &table.rows {
        let raw = rec.get(r).unwrap_or("");
        if is_missing(raw) {
            missing.push(format!("line {line}"));
            continue;
        }
        let rate: f64 = parse_field(rec, r, *line, "mortality_rate")?;
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::MalformedRow {
                line: *line,
                reason: format!("mortality rate must be positive, got {rate}"),
            });
        }
        out.push(MortalityRecord {
            year: parse_field(rec, y, *line, "year")?,
            age: parse_field(rec, a, *line, "age")?,
            sex: field(rec, s, *line, "sex")?.to_string(),
            rate,
        });
    }
    if !missing.is_empty() {
        return Err(Error::MissingData(format!(
            "{} mortality rate(s) missing: {}",
            missing.len(),
            summarize(&missing)
        )));
    }
    Ok(out)
}

fn summarize(items: &[String]) -> String {
    const SHOW: usize = 10;
    let head = items.iter().take(SHOW).cloned().collect::<Vec<_>>().join(", ");
    if items.len() > SHOW {
        format!("{head}, ... ({} more)", items.len() - SHOW)
    } else {
        head
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MortalityConfig {
    pub window_h: usize,
    pub alpha: f64,
    pub beta: f64,
    pub min_count: usize,
    /// Score `log(rate)` rather than the raw rate.
    pub log_rates: bool,
}

impl Default for MortalityConfig {
    fn default() -> Self {
        Self {
            window_h: 10,
            alpha: 0.01,
            beta: DEFAULT_BETA,
            min_count: 3,
            log_rates: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MortalityAnomaly {
    pub year: i32,
    pub age: u32,
    pub sex: String,
    pub rate: f64,
    pub surprisal: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MortalityResult {
    /// Per-record surprisals and tail probabilities, in input order.
    pub surprisals: Vec<f64>,
    pub probs: Vec<f64>,
    /// Flags before the group filter.
    pub raw_report: AnomalyReport,
    /// Flags after the group filter; indices refer to the input records.
    pub report: AnomalyReport,
    pub anomalies: Vec<MortalityAnomaly>,
    pub fits: BTreeMap<String, GpdFit>,
}

impl MortalityResult {
    /// Years with at least one retained anomaly for `sex`.
    pub fn flagged_years(&self, sex: &str) -> BTreeSet<i32> {
        self.anomalies
            .iter()
            .filter(|a| a.sex == sex)
            .map(|a| a.year)
            .collect()
    }
}

pub fn run_mortality(records: &[MortalityRecord], config: &MortalityConfig) -> Result<MortalityResult> {
    crate::surprisal::check_alpha(config.alpha)?;
    if records.is_empty() {
        return Err(Error::InsufficientData {
            what: "mortality records",
            needed: 1,
            got: 0,
        });
    }
    if config.min_count == 0 {
        return Err(invalid("min_count must be at least 1"));
    }
    // (sex, age) -> year -> record index
    let mut series: BTreeMap<(String, u32), BTreeMap<i32, usize>> = BTreeMap::new();
    let mut years = BTreeSet::new();
    for (i, r) in records.iter().enumerate() {
        years.insert(r.year);
        let prev = series
            .entry((r.sex.clone(), r.age))
            .or_default()
            .insert(r.year, i);
        if prev.is_some() {
            return Err(invalid(format!(
                "duplicate record for year {}, age {}, sex {}",
                r.year, r.age, r.sex
            )));
        }
    }
    let (first, last) = (*years.first().unwrap(), *years.last().unwrap());
    let mut gaps = Vec::new();
    for ((sex, age), by_year) in &series {
        for year in first..=last {
            if !by_year.contains_key(&year) {
                gaps.push(format!("{year}/{age}/{sex}"));
            }
        }
    }
    if !gaps.is_empty() {
        return Err(Error::MissingData(format!(
            "{} year/age/sex cell(s) absent: {}",
            gaps.len(),
            summarize(&gaps)
        )));
    }

    let keys: Vec<&(String, u32)> = series.keys().collect();
    let hampel = HampelModel::new(config.window_h);
    let scored: Vec<Result<Vec<(usize, f64)>>> = replicate(keys.len(), |k| {
        let idx: Vec<usize> = series[keys[k]].values().copied().collect();
        let y: Vec<f64> = idx
            .iter()
            .map(|&i| if config.log_rates { records[i].rate.ln() } else { records[i].rate })
            .collect();
        let out = hampel.surprisals(&y)?;
        Ok(idx.into_iter().zip(out.sample.surprisals).collect())
    });
    let mut surprisals = vec![f64::NAN; records.len()];
    for s in scored {
        for (i, v) in s? {
            surprisals[i] = v;
        }
    }

    let mut probs = vec![f64::NAN; records.len()];
    let mut fits = BTreeMap::new();
    let sexes: BTreeSet<&String> = series.keys().map(|(s, _)| s).collect();
    for sex in sexes {
        let idx: Vec<usize> = (0..records.len()).filter(|&i| &records[i].sex == sex).collect();
        let pooled: Vec<f64> = idx.iter().map(|&i| surprisals[i]).collect();
        let fit = GpdFit::fit_tail(&pooled, config.beta)?;
        for &i in &idx {
            probs[i] = fit.tail_prob(surprisals[i]);
        }
        fits.insert(sex.clone(), fit);
    }

    let raw_report = flag_probs(&probs, config.alpha)?;
    let report = group_filter(
        &raw_report,
        |i| (records[i].year, records[i].sex.clone()),
        config.min_count,
    )?;
    let mut anomalies: Vec<MortalityAnomaly> = report
        .flagged
        .iter()
        .map(|&i| MortalityAnomaly {
            year: records[i].year,
            age: records[i].age,
            sex: records[i].sex.clone(),
            rate: records[i].rate,
            surprisal: surprisals[i],
            p: probs[i],
        })
        .collect();
    anomalies.sort_by(|a, b| {
        (&a.sex, a.year, a.age).cmp(&(&b.sex, b.year, b.age))
    });
    Ok(MortalityResult {
        surprisals,
        probs,
        raw_report,
        report,
        anomalies,
        fits,
    })
}

pub fn run_mortality_csv<R: Read>(reader: R, config: &MortalityConfig) -> Result<MortalityResult> {
    run_mortality(&read_mortality_csv(reader)?, config)
}
