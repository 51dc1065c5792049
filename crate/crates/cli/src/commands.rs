use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use surprisal::apps::cricket::{run_cricket_csv, CricketConfig};
use surprisal::apps::mortality::{run_mortality_csv, MortalityConfig};
use surprisal::conditional::HampelModel;
use surprisal::evt::{RegimeStudy, TailBound, MIN_REPS};
use surprisal::simulation::{
    default_y_grid, run_expt_false_rate, run_expt_univariate, ExperimentConfig, DEFAULT_REPS,
    FAST_REPS,
};
use surprisal::surprisal::{
    assumed_estimate, assumed_estimate_conditional, check_alpha, empirical_estimate,
    gpd_estimate, TailParams,
};
use surprisal::{flag_anomalies, DistributionModel, Error, ModelSpec, TailEstimate};

use crate::table::{Cell, Format, Table};
use crate::{
    emit, open, CliError, CliResult, CricketArgs, EvtArgs, Expt1Args, Expt2Args, HampelArgs,
    MortalityArgs, Reps, ScoreArgs,
};

struct Input {
    headers: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Input {
    fn read<R: Read>(reader: R) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(Error::from)?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::MalformedRow {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                reason: e.to_string(),
            })?;
            rows.push((rec.position().map(|p| p.line()).unwrap_or(0), rec));
        }
        if rows.is_empty() {
            return Err(Error::InsufficientData {
                what: "input rows",
                needed: 1,
                got: 0,
            }
            .into());
        }
        Ok(Self { headers, rows })
    }

    fn column(&self, name: &str) -> CliResult<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("input has no column `{name}`")))
    }

    fn number(&self, row: usize, col: usize) -> CliResult<f64> {
        let (line, rec) = &self.rows[row];
        let raw = rec.get(col).unwrap_or("");
        raw.parse().map_err(|_| {
            Error::MalformedRow {
                line: *line,
                reason: format!("`{}` is not a number: `{raw}`", self.headers[col]),
            }
            .into()
        })
    }
}

fn tail_estimate(estimator: &str, surprisals: &[f64], beta: f64) -> CliResult<TailEstimate> {
    Ok(match estimator {
        "empirical" => empirical_estimate(surprisals)?,
        "gpd" => gpd_estimate(surprisals, beta)?,
        other => return Err(CliError::Usage(format!("estimator `{other}` is not available here"))),
    })
}

fn describe(est: &TailEstimate) {
    if let TailParams::Gpd(fit) = &est.params {
        eprintln!(
            "gpd tail: u={} sigma={} xi={} exceedances={} loglik={}",
            fit.threshold_u, fit.scale_sigma, fit.shape_xi, fit.n_exceed, fit.loglik
        );
    }
}

pub fn score(a: &ScoreArgs) -> CliResult<()> {
    check_alpha(a.alpha)?;
    let spec = ModelSpec::parse(&a.model)?;
    let input = Input::read(open(&a.input)?)?;
    let refs: Vec<(String, usize)> = spec
        .columns()
        .into_iter()
        .map(|c| input.column(&c).map(|i| (c, i)))
        .collect::<CliResult<_>>()?;
    let build_for = |row: usize| -> CliResult<DistributionModel> {
        let mut vals = BTreeMap::new();
        for (name, idx) in &refs {
            vals.insert(name.as_str(), input.number(row, *idx)?);
        }
        Ok(spec.build(&|c| vals.get(c).copied())?)
    };
    let first = build_for(0)?;
    let arity = first.arity();
    let obs: Vec<usize> = if a.columns.is_empty() {
        let picked: Vec<usize> = (0..input.headers.len())
            .filter(|i| refs.iter().all(|(_, r)| r != i))
            .take(arity)
            .collect();
        if picked.len() < arity {
            return Err(CliError::Usage(format!(
                "model needs {arity} observation column(s) but the input has {}",
                picked.len()
            )));
        }
        picked
    } else {
        let picked = a
            .columns
            .iter()
            .map(|c| input.column(c))
            .collect::<CliResult<Vec<_>>>()?;
        if picked.len() != arity {
            return Err(Error::ArityMismatch {
                expected: arity,
                got: picked.len(),
            }
            .into());
        }
        picked
    };

    let n = input.rows.len();
    let mut values = Vec::with_capacity(n * arity);
    let mut models = Vec::new();
    let mut surprisals = Vec::with_capacity(n);
    for row in 0..n {
        let y: Vec<f64> = obs
            .iter()
            .map(|&c| input.number(row, c))
            .collect::<CliResult<_>>()?;
        let model = if refs.is_empty() { first.clone() } else { build_for(row)? };
        surprisals.push(-model.log_density(&y)?);
        values.extend(y);
        if !refs.is_empty() {
            models.push(model);
        }
    }
    if surprisals.iter().any(|s| s.is_nan()) {
        return Err(CliError::Usage("input contains NaN".into()));
    }

    let est = match a.estimator.as_str() {
        "assumed" if refs.is_empty() => assumed_estimate(&first, &surprisals),
        "assumed" => assumed_estimate_conditional(&models, &surprisals)?,
        other => tail_estimate(other, &surprisals, a.beta)?,
    };
    let report = flag_anomalies(&est, a.alpha)?;
    eprintln!(
        "flagged {} of {n} at alpha={} ({} estimator, model {})",
        report.flagged.len(),
        a.alpha,
        est.method,
        if refs.is_empty() { first.to_string() } else { spec.to_string() }
    );
    describe(&est);

    let mut headers: Vec<String> = obs.iter().map(|&c| input.headers[c].clone()).collect();
    headers.extend(refs.iter().map(|(name, _)| name.clone()));
    headers.extend(["surprisal", "p", "flagged"].map(String::from));
    let mut table = Table::new(headers);
    for row in 0..n {
        let mut cells: Vec<Cell> = values[row * arity..(row + 1) * arity]
            .iter()
            .map(|&v| v.into())
            .collect();
        for (_, idx) in &refs {
            cells.push(input.number(row, *idx)?.into());
        }
        cells.push(surprisals[row].into());
        cells.push(est.probs[row].into());
        cells.push((est.probs[row] < a.alpha).into());
        table.push(cells);
    }
    emit(&table, &a.common)
}

pub fn hampel(a: &HampelArgs) -> CliResult<()> {
    check_alpha(a.alpha)?;
    let input = Input::read(open(&a.input)?)?;
    let col = input.column(&a.column)?;
    let y: Vec<f64> = (0..input.rows.len())
        .map(|r| input.number(r, col))
        .collect::<CliResult<_>>()?;
    let series = HampelModel::new(a.window).surprisals(&y)?;
    let surprisals = &series.sample.surprisals;
    let est = match a.estimator.as_str() {
        "assumed" => series.assumed_estimate(),
        other => tail_estimate(other, surprisals, a.beta)?,
    };
    let report = flag_anomalies(&est, a.alpha)?;
    eprintln!(
        "flagged {} of {} at alpha={} (h={}, {} estimator)",
        report.flagged.len(),
        y.len(),
        a.alpha,
        a.window,
        est.method
    );
    describe(&est);
    let mut table = Table::new(["t", "value", "median", "mad", "sigma", "surprisal", "p", "flagged"]);
    for t in 0..y.len() {
        table.push(vec![
            t.into(),
            y[t].into(),
            series.medians[t].into(),
            series.mads[t].into(),
            series.sigmas[t].into(),
            surprisals[t].into(),
            est.probs[t].into(),
            (est.probs[t] < a.alpha).into(),
        ]);
    }
    emit(&table, &a.common)
}

pub fn cricket(a: &CricketArgs) -> CliResult<()> {
    let config = CricketConfig {
        beta: a.beta,
        alpha: a.alpha,
    };
    let out = run_cricket_csv(open(&a.input)?, &config)?;
    eprintln!(
        "pooled not-out proportion: {} / {} = {:.3}",
        out.total_notouts,
        out.total_innings,
        out.pooled_proportion()
    );
    if out.dropped_zero_innings > 0 {
        eprintln!("skipped {} batter(s) with no innings", out.dropped_zero_innings);
    }
    let g = &out.gpd;
    eprintln!(
        "gpd tail: u={} sigma={} xi={} exceedances={}; flagged {} of {} at alpha={}",
        g.threshold_u,
        g.scale_sigma,
        g.shape_xi,
        g.n_exceed,
        out.report.flagged.len(),
        out.ranked.len(),
        a.alpha
    );
    let mut table = Table::new([
        "rank",
        "player",
        "innings",
        "notouts",
        "expected_notouts",
        "fitted_prob",
        "surprisal",
        "p",
        "flagged",
    ]);
    for r in &out.ranked {
        table.push(vec![
            r.rank.into(),
            r.player.as_str().into(),
            r.innings.into(),
            r.notouts.into(),
            r.expected_notouts.into(),
            r.fitted_prob.into(),
            r.surprisal.into(),
            r.p.into(),
            r.flagged.into(),
        ]);
    }
    emit(&table, &a.common)
}

pub fn mortality(a: &MortalityArgs) -> CliResult<()> {
    let config = MortalityConfig {
        window_h: a.window,
        alpha: a.alpha,
        beta: a.beta,
        min_count: a.min_group,
        log_rates: true,
    };
    let out = run_mortality_csv(open(&a.input)?, &config)?;
    eprintln!(
        "{} anomalies out of {} observations ({} before requiring {} ages per year and sex)",
        out.report.flagged.len(),
        out.probs.len(),
        out.raw_report.flagged.len(),
        a.min_group
    );
    for (sex, fit) in &out.fits {
        let years: Vec<String> = out.flagged_years(sex).iter().map(|y| y.to_string()).collect();
        eprintln!(
            "{sex}: gpd u={} sigma={} xi={}; years {}",
            fit.threshold_u,
            fit.scale_sigma,
            fit.shape_xi,
            if years.is_empty() { "none".into() } else { years.join(" ") }
        );
    }
    let mut table = Table::new(["year", "age", "sex", "mortality_rate", "surprisal", "p"]);
    for x in &out.anomalies {
        table.push(vec![
            x.year.into(),
            x.age.into(),
            x.sex.as_str().into(),
            x.rate.into(),
            x.surprisal.into(),
            x.p.into(),
        ]);
    }
    emit(&table, &a.common)
}

fn resolve_reps(r: &Reps, default: usize, fast: usize) -> usize {
    match (r.reps, r.fast) {
        (Some(n), _) => n,
        (None, true) => fast,
        (None, false) => default,
    }
}

/// Pivots `(x, series, value)` triples into one column per series, keeping
/// the order in which series and x values first appear.
fn pivot(x_name: &str, triples: &[(String, String, f64)]) -> Table {
    let mut series: Vec<&str> = Vec::new();
    let mut xs: Vec<&str> = Vec::new();
    let mut cells: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for (x, s, v) in triples {
        if !series.contains(&s.as_str()) {
            series.push(s);
        }
        if !xs.contains(&x.as_str()) {
            xs.push(x);
        }
        cells.insert((x, s), *v);
    }
    let mut table = Table::new(std::iter::once(x_name).chain(series.iter().copied()));
    for x in &xs {
        let mut row = vec![Cell::Text(x.to_string())];
        for s in &series {
            row.push(cells.get(&(*x, *s)).copied().unwrap_or(f64::NAN).into());
        }
        table.push(row);
    }
    table
}

fn write_plot(dir: &Path, name: &str, table: &Table) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut f = fs::File::create(&path)?;
    table.write(&mut f, Format::Csv)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn expt1(a: &Expt1Args) -> CliResult<()> {
    let reps = resolve_reps(&a.reps, DEFAULT_REPS, FAST_REPS);
    let mut config = ExperimentConfig::univariate_default(a.truth == "t4", reps, a.common.seed);
    config.n_grid = vec![a.n];
    let rows = run_expt_univariate(&config, &default_y_grid())?;
    let mut table = Table::new(["y", "distribution_used", "estimator", "p_estimate", "p_true"]);
    let mut triples = Vec::new();
    for r in &rows {
        table.push(vec![
            r.y.into(),
            r.distribution_used.as_str().into(),
            r.estimator.as_str().into(),
            r.p_estimate.into(),
            r.p_true.into(),
        ]);
        triples.push((r.y.to_string(), "true".to_string(), r.p_true));
        triples.push((
            r.y.to_string(),
            format!("{} {}", r.distribution_used, r.estimator),
            r.p_estimate,
        ));
    }
    if let Some(dir) = &a.plot_data {
        write_plot(dir, &format!("tail_curves_{}.csv", a.truth), &pivot("y", &triples))?;
    }
    emit(&table, &a.common)
}

pub fn expt2(a: &Expt2Args) -> CliResult<()> {
    let reps = resolve_reps(&a.reps, DEFAULT_REPS, FAST_REPS);
    let mut config = ExperimentConfig::false_rate_default(reps, a.common.seed);
    config.alpha = a.alpha;
    if !a.n_grid.is_empty() {
        config.n_grid = a.n_grid.clone();
    }
    let result = run_expt_false_rate(&config)?;
    let mut table = Table::new([
        "n",
        "assumed_model",
        "estimator",
        "mean_flag_rate",
        "ci_low",
        "ci_high",
        "mc_se",
    ]);
    let mut triples = Vec::new();
    for r in &result.rows {
        table.push(vec![
            r.n.into(),
            r.assumed_model.as_str().into(),
            r.estimator.as_str().into(),
            r.mean_flag_rate.into(),
            r.ci_low.into(),
            r.ci_high.into(),
            r.mc_se.into(),
        ]);
        triples.push((r.n.to_string(), format!("{} {}", r.assumed_model, r.estimator), r.mean_flag_rate));
    }
    for g in &result.agreement {
        eprintln!(
            "n={} {} vs {} ({}): identical flag sets in {}/{} reps, identical counts in {}/{}",
            g.n, g.model_a, g.model_b, g.estimator, g.identical_sets, g.reps, g.identical_counts, g.reps
        );
    }
    if let Some(dir) = &a.plot_data {
        write_plot(dir, "false_rates.csv", &pivot("n", &triples))?;
    }
    emit(&table, &a.common)
}

pub fn evt_check(a: &EvtArgs) -> CliResult<()> {
    let bound: TailBound = a.bound.parse()?;
    let reps = resolve_reps(&a.reps, 2000, MIN_REPS);
    let mut rs = RegimeStudy::new(bound, a.n, reps, a.common.seed)?;
    if let Some(nu) = a.nu {
        rs.study.nu = Some(nu);
    }
    if let Some(b) = a.b {
        rs.study.b = Some(b);
    }
    let st = &rs.study;
    eprintln!(
        "{} n={} reps={} E[S]={} nu={:?} b={:?} C={:?} p={:?}",
        st.model, st.n, st.reps, st.entropy, st.nu, st.b, st.c, st.p_order
    );
    let (plain, scaled) = rs.run(a.common.seed)?;
    let mut table = Table::new(["form", "s", "threshold", "empirical_prob", "bound", "pass"]);
    for (form, checks) in [("finite", &plain), ("scaled", &scaled)] {
        for c in checks {
            table.push(vec![
                form.into(),
                c.s.into(),
                c.threshold.into(),
                c.empirical_prob.into(),
                c.bound.into(),
                c.pass.into(),
            ]);
        }
    }
    let failed = plain.iter().chain(&scaled).filter(|c| !c.pass).count();
    eprintln!("{failed} of {} grid point(s) violate the bound", plain.len() + scaled.len());
    emit(&table, &a.common)
}
