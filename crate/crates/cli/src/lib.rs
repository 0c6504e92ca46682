//! Library side of the `polyirls` command.
//!
//! Argument definitions, CSV ingestion, estimator dispatch and rendering live
//! here so the binary stays a thin shell and integration tests can compare
//! command output with direct library calls.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod fit;
pub mod matrix;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polyirls_core::{benchmark, run_simulation, Estimator, IrlsSettings, Jacobian, PolychoricOptions, SimConfig};

pub use data::{Column, Dataset, Kind, Schema, Values};
pub use error::{CliError, Result};
pub use fit::{fit_pair, trace_pair, FitSummary, Method};
pub use matrix::{correlation_matrix, Absent, MatrixResult};
pub use output::Format;

/// Environment variable holding the default worker thread count.
pub const THREADS_ENV: &str = "POLYIRLS_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "polyirls",
    version,
    about = "Polyserial, tetrachoric and polychoric correlations by IRLS"
)]
pub struct Cli {
    /// Worker threads for matrix, simulate and benchmark.
    #[arg(long, global = true, env = THREADS_ENV, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the correlation between two columns.
    Estimate(PairArgs),
    /// Pairwise correlation matrix over every non-ignored column.
    Matrix(MatrixArgs),
    /// Monte Carlo study of the estimators.
    Simulate(SimArgs),
    /// Time IRLS against two-step ML on identical simulated data.
    Benchmark(SimArgs),
    /// Per-iteration trace of a polychoric fit.
    Trace(PairArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row, or `-` for standard input.
    pub file: PathBuf,

    /// Column kind override, `NAME=ordinal|continuous|ignore`. Repeatable.
    #[arg(long = "kind", value_name = "NAME=KIND")]
    pub kinds: Vec<String>,

    /// CSV of `column,kind` rows applied before any --kind.
    #[arg(long, value_name = "FILE")]
    pub schema: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

impl DataArgs {
    pub fn load(&self) -> Result<Dataset> {
        let mut schema = match &self.schema {
            Some(p) => Schema::from_path(p)?,
            None => Schema::new(),
        };
        for entry in &self.kinds {
            schema.declare_str(entry)?;
        }
        Dataset::from_path(&self.file, &schema)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum JacobianArg {
    /// Include the dependence of the column threshold on the cells (2×2 only).
    Adjusted,
    /// Hold the thresholds fixed.
    Marginal,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Stop once successive estimates differ by at most this much.
    #[arg(long, default_value_t = IrlsSettings::default().tolerance)]
    pub tolerance: f64,

    #[arg(long, default_value_t = IrlsSettings::default().max_iterations)]
    pub max_iterations: usize,

    /// Jacobian used for the response covariance of a 2×2 table.
    #[arg(long, value_enum, default_value = "adjusted")]
    pub jacobian: JacobianArg,
}

impl FitArgs {
    pub fn options(&self) -> Result<PolychoricOptions> {
        if !(self.tolerance > 0.0) {
            return Err(CliError::Usage(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(CliError::Usage("max-iterations must be at least 1".into()));
        }
        Ok(PolychoricOptions {
            settings: IrlsSettings {
                tolerance: self.tolerance,
                max_iterations: self.max_iterations,
            },
            jacobian: match self.jacobian {
                JacobianArg::Adjusted => Jacobian::ThresholdAdjusted,
                JacobianArg::Marginal => Jacobian::Marginal,
            },
        })
    }
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub fit: FitArgs,

    /// First column; its categories index the rows of the table.
    #[arg(short = 'x', long = "x")]
    pub x: String,

    /// Second column.
    #[arg(short = 'y', long = "y")]
    pub y: String,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub fit: FitArgs,

    /// Report the wall-clock time of each pair.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Population correlation.
    #[arg(long, allow_negative_numbers = true)]
    pub rho: f64,

    /// Sample size per replication.
    #[arg(long = "N", visible_alias = "n", value_name = "N")]
    pub n: usize,

    /// Categories of the first variable.
    #[arg(long, default_value_t = 2)]
    pub s: usize,

    /// Categories of the second variable; omit to keep it continuous.
    #[arg(long)]
    pub r: Option<usize>,

    #[arg(long, default_value_t = 1000)]
    pub reps: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Comma-separated subset of irls,ml.
    #[arg(long, value_delimiter = ',', default_value = "irls,ml")]
    pub estimators: Vec<String>,

    #[arg(long, value_enum, default_value_t)]
    pub format: Format,

    /// Include wall-clock timings (simulate only; benchmark always times).
    #[arg(long)]
    pub timing: bool,
}

impl SimArgs {
    pub fn config(&self) -> Result<SimConfig> {
        let mut estimators = Vec::new();
        for name in &self.estimators {
            let e: Estimator = name.parse()?;
            if !estimators.contains(&e) {
                estimators.push(e);
            }
        }
        let cfg = SimConfig {
            rho: self.rho,
            n: self.n,
            s: self.s,
            r: self.r,
            reps: self.reps,
            seed: self.seed,
            estimators,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// How a successful command finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    /// Output was produced but at least one fit hit its iteration cap.
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Done => 0,
            Status::NotConverged => 3,
        }
    }

    fn from_converged(converged: bool) -> Self {
        if converged {
            Status::Done
        } else {
            Status::NotConverged
        }
    }
}

/// Runs one command and returns its rendered output.
pub fn execute(command: &Command) -> Result<(String, Status)> {
    match command {
        Command::Estimate(a) => {
            let data = a.data.load()?;
            let fit = fit_pair(data.column(&a.x)?, data.column(&a.y)?, data.rows(), a.fit.options()?)?;
            Ok((
                output::render_fit(&fit, a.data.format),
                Status::from_converged(fit.converged),
            ))
        }
        Command::Trace(a) => {
            let data = a.data.load()?;
            let fit = trace_pair(data.column(&a.x)?, data.column(&a.y)?, data.rows(), a.fit.options()?)?;
            Ok((
                output::render_trace(&fit, a.data.format),
                Status::from_converged(fit.converged),
            ))
        }
        Command::Matrix(a) => {
            let m = correlation_matrix(&a.data.load()?, a.fit.options()?)?;
            let status = Status::from_converged(m.nonconverged().next().is_none());
            Ok((output::render_matrix(&m, a.data.format, a.timing), status))
        }
        Command::Simulate(a) => {
            let report = run_simulation(&a.config()?)?;
            Ok((output::render_simulation(&report, a.format, a.timing), Status::Done))
        }
        Command::Benchmark(a) => {
            let report = benchmark(&a.config()?)?;
            Ok((output::render_benchmark(&report, a.format), Status::Done))
        }
    }
}
