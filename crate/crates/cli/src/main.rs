//! `surprisal`: score data, run the two applications, reproduce the
//! simulation experiments and check the maximum-surprisal bounds.
//!
//! Exit codes: 0 on success, 2 for invalid input or arguments, 3 when a
//! numerical fit fails.

mod commands;
mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use table::{Format, Table};

#[derive(Debug, Parser)]
#[command(name = "surprisal", version, about = "Surprisal-based anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score rows of a CSV under a model and flag anomalies.
    Score(ScoreArgs),
    /// Score a single time series with the Hampel model.
    Hampel(HampelArgs),
    /// Rank batters by how surprising their not-out counts are.
    Cricket(CricketArgs),
    /// Find years with unusual mortality at several ages at once.
    Mortality(MortalityArgs),
    /// Tail-probability curves under Normal/t misspecification.
    Expt1(Expt1Args),
    /// False-anomaly rates against sample size for bivariate Gamma data.
    Expt2(Expt2Args),
    /// Check the finite-sample tail bounds on the maximum surprisal.
    EvtCheck(EvtArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Output file (stdout when omitted).
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long, short)]
    input: PathBuf,
    /// Model spec, e.g. `normal(0,1)`, `t(nu=4)`,
    /// `product(gamma(2,2),gamma(2,2))` or `binomial(trials=innings,prob=0.13)`.
    #[arg(long, short)]
    model: String,
    /// Comma-separated observation columns; by default the first columns
    /// the model does not reference.
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    #[arg(long, value_parser = ["assumed", "empirical", "gpd"], default_value = "empirical")]
    estimator: String,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Tail fraction for the GPD estimator.
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct HampelArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, default_value = "value")]
    column: String,
    /// Half-window h: the window spans 2h+1 points.
    #[arg(long, default_value_t = 10)]
    window: usize,
    #[arg(long, value_parser = ["assumed", "empirical", "gpd"], default_value = "assumed")]
    estimator: String,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct CricketArgs {
    /// CSV with player, innings, notouts columns.
    #[arg(long, short, env = "SURPRISAL_CRICKET_CSV")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct MortalityArgs {
    /// CSV with year, age, sex, mortality_rate columns.
    #[arg(long, short, env = "SURPRISAL_MORTALITY_CSV")]
    input: PathBuf,
    #[arg(long, default_value_t = 10)]
    window: usize,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Keep a flag only when at least this many ages are flagged in the
    /// same year for the same sex.
    #[arg(long, default_value_t = 3)]
    min_group: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Reps {
    #[arg(long)]
    reps: Option<usize>,
    /// Reduced replication count for quick runs.
    #[arg(long)]
    fast: bool,
}

#[derive(Debug, Args)]
struct Expt1Args {
    /// True data-generating model.
    #[arg(long, value_parser = ["normal", "t4"], default_value = "normal")]
    truth: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[command(flatten)]
    reps: Reps,
    /// Directory for a wide, plot-ready copy of the results.
    #[arg(long)]
    plot_data: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Expt2Args {
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[command(flatten)]
    reps: Reps,
    #[arg(long)]
    plot_data: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct EvtArgs {
    #[arg(long, value_parser = ["subgaussian", "subexponential", "polynomial"])]
    bound: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[command(flatten)]
    reps: Reps,
    /// Override the oracle's sub-Gaussian or sub-exponential ν.
    #[arg(long)]
    nu: Option<f64>,
    /// Override the oracle's sub-exponential b.
    #[arg(long)]
    b: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] surprisal::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Io(_) => 1,
            _ => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn open(path: &PathBuf) -> CliResult<File> {
    File::open(path).map_err(|source| CliError::File {
        path: path.clone(),
        source,
    })
}

fn emit(table: &Table, common: &Common) -> CliResult<()> {
    match &common.output {
        Some(path) => {
            let file = File::create(path).map_err(|source| CliError::File {
                path: path.clone(),
                source,
            })?;
            let mut w = BufWriter::new(file);
            table.write(&mut w, common.format)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            table.write(&mut w, common.format)?;
        }
    }
    Ok(())
}

fn configure_threads() -> CliResult<()> {
    if let Ok(raw) = std::env::var("SURPRISAL_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("SURPRISAL_THREADS must be a positive integer, got `{raw}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Score(a) => commands::score(&a),
        Command::Hampel(a) => commands::hampel(&a),
        Command::Cricket(a) => commands::cricket(&a),
        Command::Mortality(a) => commands::mortality(&a),
        Command::Expt1(a) => commands::expt1(&a),
        Command::Expt2(a) => commands::expt2(&a),
        Command::EvtCheck(a) => commands::evt_check(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
