//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 verification failure,
//! 1 anything else.

pub mod commands;
pub mod config;
pub mod plot;
pub mod summary;
pub mod trace_csv;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::objectives::FeatureMean;
use config::{Overrides, QuadraticKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "crpsgd",
    version,
    about = "Parallel SGD with growing batches: runs, baselines and checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Generate a problem instance file.
    Gen {
        #[command(subcommand)]
        family: GenFamily,
    },
    /// Run one algorithm for every configured seed.
    Run(RunArgs),
    /// Run several configs on a shared problem and compare them.
    Compare(CompareArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Sweep the local SGD averaging period.
    SweepLocalH(SweepLocalHArgs),
    /// Emit a gnuplot script for a trace CSV.
    PlotScript(PlotArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenFamily {
    /// l2-regularized logistic regression on gaussian features.
    Logistic {
        #[arg(long, default_value_t = 500)]
        dim: usize,
        #[arg(long, default_value_t = 10)]
        workers: usize,
        #[arg(long, default_value_t = 10_000)]
        samples_per_worker: usize,
        #[arg(long, default_value_t = 0.001)]
        reg: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = MeanArg::Ones)]
        feature_mean: MeanArg,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// `1/2 |A x|^2` with additive gaussian gradient noise.
    Quadratic {
        #[arg(long, value_enum, default_value_t = KindArg::Isotropic)]
        kind: KindArg,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        curvature: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// `1/2 |x|^2 + a sum cos(omega x_j)` with additive gaussian noise.
    Nonconvex {
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 2.0)]
        frequency: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MeanArg {
    Ones,
    Zero,
}

impl From<MeanArg> for FeatureMean {
    fn from(m: MeanArg) -> Self {
        match m {
            MeanArg::Ones => FeatureMean::Ones,
            MeanArg::Zero => FeatureMean::Zero,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    Isotropic,
    LowRank,
    Anisotropic,
}

impl From<KindArg> for QuadraticKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Isotropic => QuadraticKind::Isotropic,
            KindArg::LowRank => QuadraticKind::LowRank,
            KindArg::Anisotropic => QuadraticKind::Anisotropic,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    pub config: Option<PathBuf>,
    /// Problem file; replaces the config's `[problem]` table.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Run configurations sharing workers, budget and problem.
    #[arg(required = true, num_args = 1..)]
    pub configs: Vec<PathBuf>,
    /// Merged trace CSV.
    #[arg(long, default_value = "compare.csv")]
    pub out: PathBuf,
    /// Comparison report JSON.
    #[arg(long, default_value = "compare.json")]
    pub report: PathBuf,
    /// Seeds for every config.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(subcommand)]
    pub suite: Suite,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Suite {
    /// One-round contraction on `1/2 |x|^2`, closed form and simulated.
    Lemma1 {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Smoothness and strong-convexity inequalities.
    Facts {
        /// Check this problem file instead of the built-in quadratics.
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        /// Number of random quadratics.
        #[arg(long, default_value_t = 10)]
        quadratics: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Gap against budget and worker count on a quadratic.
    PlRate {
        #[arg(long, default_value_t = 40)]
        seeds: u64,
    },
    /// Mean squared gradient norm of the proximal loop on a nonconvex
    /// objective.
    CatalystRate {
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
    /// Byte-identical traces across thread counts.
    Determinism {
        /// Problem file; defaults to a small logistic instance.
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        workers: usize,
        #[arg(long, default_value_t = 2000)]
        budget: u64,
    },
}

#[derive(Debug, Args)]
pub struct SweepLocalHArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub workers: usize,
    #[arg(long, default_value_t = 10_000)]
    pub budget: u64,
    #[arg(long, default_value_t = 2)]
    pub batch: u64,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub x1: f64,
    /// Averaging periods to try.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
    pub periods: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub seeds: Vec<u64>,
    /// Allowed final-loss ratio to the `H = 1` run.
    #[arg(long, default_value_t = 1.01)]
    pub factor: f64,
    /// Write the JSON table here as well.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum XAxis {
    Sfo,
    Comm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum YAxis {
    Loss,
    GradNormSq,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Trace CSV to plot.
    pub trace: PathBuf,
    #[arg(long, value_enum, default_value_t = XAxis::Sfo)]
    pub x: XAxis,
    #[arg(long, value_enum, default_value_t = YAxis::Loss)]
    pub y: YAxis,
    /// Image the script renders to.
    #[arg(long, default_value = "trace.png")]
    pub image: PathBuf,
    /// Script path; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// What a successful command reports.
#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Done,
    VerificationFailed,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(cli.command) {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::VerificationFailed) => EXIT_VERIFY,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_FAILURE
    }
}
