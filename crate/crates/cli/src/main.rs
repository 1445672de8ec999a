//! `laborflux`: one binary, one subcommand per pipeline stage. Stages share
//! data only through files.
//!
//! Exit codes: 0 success, 1 data error, 2 config or usage error.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use laborflux::evaluate::{EvaluateError, StandardizeScope};
use laborflux::regress::RegressError;
use laborflux::risk::RiskError;
use laborflux::synth::SynthError;

pub use config::RunConfig;

/// Environment variable holding the worker thread count. Results do not
/// depend on it.
pub const THREADS_VAR: &str = "LABORFLUX_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Config(_) => 2,
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io(_) => CliError::Data(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<EvaluateError> for CliError {
    fn from(e: EvaluateError) -> Self {
        match e {
            EvaluateError::UnknownScore(_)
            | EvaluateError::NoScores
            | EvaluateError::Regress(RegressError::UnknownEstimator { .. })
            | EvaluateError::Risk(RiskError::UnknownScore(_)) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<laborflux::ingest::IngestError> for CliError {
    fn from(e: laborflux::ingest::IngestError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<RiskError> for CliError {
    fn from(e: RiskError) -> Self {
        EvaluateError::from(e).into()
    }
}

impl From<RegressError> for CliError {
    fn from(e: RegressError) -> Self {
        EvaluateError::from(e).into()
    }
}

impl From<laborflux::skills::SkillError> for CliError {
    fn from(e: laborflux::skills::SkillError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "laborflux",
    version,
    about = "Occupation unemployment risk and exposure-score evaluation pipeline",
    after_help = "Set LABORFLUX_THREADS to fix the worker thread count; outputs are identical at any setting."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Input and output selection shared by the data stages.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// Run configuration file (TOML). Relative paths inside resolve
    /// against its directory.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory of input tables under the generator's file names; replaces
    /// the config's [inputs].
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Output directory; overrides `output`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Random seed; overrides `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic input tables with planted effects.
    Synth {
        /// Generator config (TOML).
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Target directory for the tables, truth file and planted parameters.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Load and validate every input table, then print the validation report.
    IngestCheck {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Estimate unemployment risk per state, month and major occupation.
    Risk {
        #[command(flatten)]
        run: RunArgs,
        /// Write within-year medians of monthly risk per (state, year, occupation).
        #[arg(long)]
        annual_median: bool,
    },
    /// Employment-weighted state exposure per state-year and score.
    Exposure {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Principal components of occupation skill profiles.
    Pca {
        #[command(flatten)]
        run: RunArgs,
        /// Number of components; overrides `analysis.pca_k`.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Within-occupation skill change since the baseline year, with regressions on exposure.
    SkillChange {
        #[command(flatten)]
        run: RunArgs,
        /// Overrides `analysis.skill_baseline_year`.
        #[arg(long)]
        baseline_year: Option<i32>,
        /// Overrides `analysis.skill_max_year`.
        #[arg(long)]
        max_year: Option<i32>,
    },
    /// Fit the risk model suite (headline models and per-score models).
    Regress {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Repeated k-fold cross-validation of the baseline against baseline plus scores.
    Cv {
        #[command(flatten)]
        run: RunArgs,
        /// Registered estimator; overrides `analysis.estimator`.
        #[arg(long)]
        estimator: Option<String>,
        /// Overrides `analysis.cv_trials`.
        #[arg(long)]
        trials: Option<usize>,
        /// Overrides `analysis.cv_folds`.
        #[arg(long)]
        folds: Option<usize>,
        /// Rows whose statistics standardize each fold.
        #[arg(long, value_enum)]
        standardize: Option<Scope>,
    },
    /// Run the full analysis and write tables, figures and report.json.
    Analyze {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Render an analysis report as text.
    Report {
        /// An analysis output directory or its report.json.
        path: PathBuf,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Registered estimator (ols, lasso, lasso-cv); overrides `analysis.estimator`.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Restrict to these headline models, e.g. 1,2,3; skips per-score models.
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u8).range(1..=3))]
    pub models: Option<Vec<u8>>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum Scope {
    Train,
    Global,
}

impl From<Scope> for StandardizeScope {
    fn from(s: Scope) -> Self {
        match s {
            Scope::Train => StandardizeScope::Train,
            Scope::Global => StandardizeScope::Global,
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize =
        v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::Config(format!("{THREADS_VAR}={v} is not a positive integer"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("{THREADS_VAR}: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Synth { config, out, seed } => commands::synth(&config, &out, seed),
        Command::IngestCheck { run } => commands::ingest_check(&run),
        Command::Risk { run, annual_median } => commands::risk(&run, annual_median),
        Command::Exposure { run } => commands::exposure(&run),
        Command::Pca { run, k } => commands::pca(&run, k),
        Command::SkillChange {
            run,
            baseline_year,
            max_year,
        } => commands::skill_change(&run, baseline_year, max_year),
        Command::Regress { run, model } => commands::regress(&run, &model),
        Command::Cv {
            run,
            estimator,
            trials,
            folds,
            standardize,
        } => commands::cv(&run, estimator, trials, folds, standardize.map(Into::into)),
        Command::Analyze { run, model } => commands::analyze(&run, &model),
        Command::Report { path } => report::print(&path),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("laborflux: {e}");
            ExitCode::from(e.code())
        }
    }
}
