use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cpreg_cli::commands::{self, CvCommandOptions, FitOptions};
use cpreg_cli::cv::{CvOptions, GridSpec};
use cpreg_core::solver::DifferenceKind;

/// Nonlinear regression by smooth low-rank completion of a discretized
/// response grid.
#[derive(Parser)]
#[command(name = "cpreg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Diff {
    First,
    Second,
}

impl From<Diff> for DifferenceKind {
    fn from(d: Diff) -> Self {
        match d {
            Diff::First => DifferenceKind::First,
            Diff::Second => DifferenceKind::Second,
        }
    }
}

#[derive(Args)]
struct CommonFitArgs {
    /// Ridge penalty weight.
    #[arg(long, default_value_t = 1e-3)]
    rho: f64,
    /// Smoothness penalty weight on ordinal/continuous modes.
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Difference operator behind the smoothness penalty.
    #[arg(long, value_enum, default_value = "first")]
    diff: Diff,
    /// Alphabet size for continuous predictors (reduced automatically when a
    /// column has fewer distinct values).
    #[arg(long, default_value_t = 25)]
    alphabet: usize,
    #[arg(long, default_value_t = 500)]
    max_sweeps: usize,
    /// Relative objective-change stopping tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Independent random initializations; the best final objective wins.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    init_scale: f64,
    /// Drop the 1/M normalization of the data term.
    #[arg(long)]
    unnormalized: bool,
    /// Additive smoothing for the per-mode marginals used under missing
    /// inputs (0 keeps raw frequencies).
    #[arg(long, default_value_t = 0.0)]
    smoothing_alpha: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model from a training CSV and its schema file.
    Fit {
        /// Training CSV (header row required).
        data: PathBuf,
        /// Sidecar schema file declaring each column's role.
        #[arg(long)]
        schema: PathBuf,
        /// Where to write the model file.
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        /// Number of components F.
        #[arg(long, default_value_t = 10)]
        rank: usize,
        #[command(flatten)]
        common: CommonFitArgs,
    },
    /// Predict responses for an input CSV (missing cells allowed).
    Predict {
        model: PathBuf,
        data: PathBuf,
        #[arg(long, default_value = "predictions.csv")]
        out: PathBuf,
    },
    /// Report RMSE of a model on a labeled CSV.
    Evaluate { model: PathBuf, data: PathBuf },
    /// Cross-validate a hyperparameter grid; optionally follow with repeated
    /// holdout evaluation of the best cell.
    Cv {
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Candidate ranks.
        #[arg(long, value_delimiter = ',', default_values_t = GridSpec::default().ranks)]
        rank: Vec<usize>,
        /// Candidate ridge weights.
        #[arg(long, value_delimiter = ',', default_values_t = GridSpec::default().ridges)]
        rho: Vec<f64>,
        /// Candidate smoothness weights.
        #[arg(long, value_delimiter = ',', default_values_t = GridSpec::default().smoothness)]
        mu: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Monte-Carlo repetitions (reshuffled folds; with --train-frac,
        /// reshuffled holdout splits).
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// Hold out this fraction's complement for test: select
        /// hyperparameters on the training share, then evaluate the best cell
        /// over --repeats reshuffled splits.
        #[arg(long)]
        train_frac: Option<f64>,
        /// Restarts for the holdout fits (grid-search fits always use 1).
        #[arg(long, default_value_t = 1)]
        holdout_restarts: usize,
        /// Write the per-cell table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "first")]
        diff: Diff,
        #[arg(long, default_value_t = 25)]
        alphabet: usize,
        #[arg(long, default_value_t = 200)]
        max_sweeps: usize,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        smoothing_alpha: f64,
    },
}

fn run() -> cpreg_cli::Result<()> {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Fit {
            data,
            schema,
            out,
            rank,
            common,
        } => commands::cmd_fit(
            &FitOptions {
                data,
                schema,
                output: out,
                rank,
                ridge: common.rho,
                smoothness: common.mu,
                difference: common.diff.into(),
                alphabet: common.alphabet,
                max_sweeps: common.max_sweeps,
                rel_tol: common.tol,
                restarts: common.restarts,
                seed: common.seed,
                init_scale: common.init_scale,
                normalize: !common.unnormalized,
                smoothing_alpha: common.smoothing_alpha,
            },
            &mut stdout,
        ),
        Command::Predict { model, data, out } => commands::cmd_predict(&model, &data, &out),
        Command::Evaluate { model, data } => commands::cmd_evaluate(&model, &data, &mut stdout),
        Command::Cv {
            data,
            schema,
            rank,
            rho,
            mu,
            folds,
            repeats,
            train_frac,
            holdout_restarts,
            out,
            diff,
            alphabet,
            max_sweeps,
            tol,
            seed,
            smoothing_alpha,
        } => commands::cmd_cv(
            &CvCommandOptions {
                data,
                schema,
                grid: GridSpec {
                    ranks: rank,
                    ridges: rho,
                    smoothness: mu,
                },
                cv: CvOptions {
                    folds,
                    repeats,
                    seed,
                    alphabet,
                    difference: diff.into(),
                    max_sweeps,
                    rel_tol: tol,
                    restarts: 1,
                    init_scale: 1.0,
                    normalize: true,
                    smoothing_alpha,
                },
                train_fraction: train_frac,
                holdout_restarts,
                table_out: out,
            },
            &mut stdout,
        ),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
