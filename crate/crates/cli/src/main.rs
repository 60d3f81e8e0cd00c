//! `rssiloc`: simulate, filter, locate, fit, predict and evaluate.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use rssiloc_core::rng::DEFAULT_SEED;
use rssiloc_core::{Error, ErrorClass};

#[derive(Parser, Debug)]
#[command(name = "rssiloc", version, about = "RSSI indoor localization toolkit")]
pub struct Cli {
    /// `key=value` file with defaults for any flag of the chosen command.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for simulation, locating and forest fitting.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize a regression CSV of noisy RSSI rows with ground truth.
    Simulate(SimulateArgs),
    /// Smooth every RSSI column of a CSV.
    Filter(FilterArgs),
    /// Estimate positions from RSSI with a geometric solver.
    Locate(LocateArgs),
    /// Fit a learner, report train/test metrics and save the model.
    Fit(FitArgs),
    /// Apply a saved model to a CSV.
    Predict(PredictArgs),
    /// Score a predictions file against ground truth.
    Evaluate(EvaluateArgs),
    /// Fit the stacked tree ensemble and report every component.
    Treeloc(TreelocArgs),
}

#[derive(Args, Debug, Clone)]
pub struct PathLossArgs {
    /// Reference power at d0 (dBm).
    #[arg(long, default_value_t = -40.0, allow_negative_numbers = true)]
    pub p0: f64,
    /// Reference distance (cm).
    #[arg(long, default_value_t = 100.0)]
    pub d0: f64,
    /// Path-loss exponent.
    #[arg(long, default_value_t = 2.0)]
    pub eta: f64,
    /// Shadowing standard deviation (dB).
    #[arg(long, default_value_t = 2.0)]
    pub sigma_p: f64,
    /// Anchor coordinate noise standard deviation (cm).
    #[arg(long, default_value_t = 0.0)]
    pub sigma_a: f64,
}

#[derive(Args, Debug, Clone)]
pub struct AnchorArgs {
    /// Inline anchor coordinates in cm: `x,y;x,y;...`.
    #[arg(long, allow_hyphen_values = true)]
    pub anchors: Option<String>,
    /// CSV of anchor coordinates, one `x,y` per line.
    #[arg(long, value_name = "FILE")]
    pub anchors_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub anchors: AnchorArgs,
    #[command(flatten)]
    pub radio: PathLossArgs,
    /// Number of random target positions inside the anchors' bounding box.
    #[arg(long, default_value_t = 32)]
    pub positions: usize,
    /// Samples per position.
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterName {
    Ma,
    Median,
    Gaussian,
    Kalman,
}

#[derive(Args, Debug)]
pub struct FilterArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = FilterName::Ma)]
    pub filter: FilterName,
    /// Moving-average window length.
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    /// Median half-width (window is `2 * half_width + 1`).
    #[arg(long, default_value_t = 2)]
    pub half_width: usize,
    /// Gaussian kernel standard deviation in samples.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Kalman initial error covariance (default 1).
    #[arg(long)]
    pub kalman_p0: Option<f64>,
    /// Kalman process noise (default 1e-4).
    #[arg(long)]
    pub kalman_q: Option<f64>,
    /// Kalman measurement noise (default: sample variance of the first samples).
    #[arg(long)]
    pub kalman_r: Option<f64>,
    /// Filter each run of rows sharing the same `X_Actual`/`Y_Actual` separately.
    #[arg(long)]
    pub group_by_target: bool,
}

#[derive(Args, Debug)]
pub struct LocateArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[command(flatten)]
    pub anchors: AnchorArgs,
    #[command(flatten)]
    pub radio: PathLossArgs,
    /// trilateration, lls, wls, wls-bc, hyperbolic or hyperbolic-w.
    #[arg(long, default_value = "lls")]
    pub solver: String,
    /// Readings at or below this value mark the anchor as out of range.
    #[arg(long, default_value_t = -200.0, allow_negative_numbers = true)]
    pub sentinel: f64,
    /// Include the design/right-hand-side cross term in wls-bc.
    #[arg(long)]
    pub cross_term: bool,
    /// Per-row predictions CSV.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Report file; the report is always printed to stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelName {
    Linear,
    Poly,
    Tree,
    ExtraTrees,
    Forest,
    Treeloc,
    Knn,
    Mlp,
}

#[derive(Args, Debug, Clone)]
pub struct TreeArgs {
    #[arg(long, default_value_t = 25)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 1)]
    pub min_leaf: usize,
    #[arg(long, default_value_t = 100)]
    pub n_trees: usize,
}

#[derive(Args, Debug, Clone)]
pub struct TreelocFlags {
    /// Use the published combiner coefficients instead of fitting them.
    #[arg(long)]
    pub fixed_paper: bool,
    /// Seeded random partition instead of contiguous thirds.
    #[arg(long)]
    pub shuffle: bool,
    /// Fit the combiner on a held-out 20% of the training rows.
    #[arg(long)]
    pub combiner_holdout: bool,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelName,
    /// Held-out fraction. Regression uses the trailing rows, classification a
    /// seeded shuffle.
    #[arg(long, default_value_t = 0.2)]
    pub test_size: f64,
    #[arg(long, default_value_t = 4)]
    pub degree: usize,
    /// Use all monomials up to `degree` instead of per-feature powers.
    #[arg(long)]
    pub cross_terms: bool,
    #[command(flatten)]
    pub tree: TreeArgs,
    #[command(flatten)]
    pub treeloc: TreelocFlags,
    /// Zone mapping (`label=zone` lines) for knn and mlp.
    #[arg(long)]
    pub zones: Option<PathBuf>,
    /// Neighbors for knn; when absent k is tuned over `2..=20` on a
    /// validation split of the training rows.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 10)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Feed raw RSSI to the network instead of standardized columns.
    #[arg(long)]
    pub no_standardize: bool,
    /// Per-epoch accuracy trace CSV (mlp).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Predictions for the held-out rows (all rows when `--test-size 0`).
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, short)]
    pub input: PathBuf,
    /// Zone mapping to attach true zones to classification input.
    #[arg(long)]
    pub zones: Option<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Regression,
    Classification,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Ground truth CSV.
    #[arg(long)]
    pub actual: PathBuf,
    /// Predictions CSV; may be the same file as `--actual`.
    #[arg(long)]
    pub predicted: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalMode::Regression)]
    pub mode: EvalMode,
    /// Zone mapping for truth files that only carry location labels.
    #[arg(long)]
    pub zones: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TreelocArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub test_size: f64,
    #[command(flatten)]
    pub tree: TreeArgs,
    #[command(flatten)]
    pub treeloc: TreelocFlags,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

fn command() -> clap::Command {
    Cli::command().mut_subcommands(|s| s.args_override_self(true)).args_override_self(true)
}

fn main() -> ExitCode {
    let cmd = command();
    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::expand(&cmd, argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = match cmd.try_get_matches_from(argv).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
