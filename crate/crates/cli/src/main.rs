//! `paf`: synthetic simulation, sweeps, theory queries and rating-data evaluation.

mod commands;
mod grid;
mod manifest;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

/// Environment variable read for the default `--workers` value.
pub const WORKERS_ENV: &str = "PAF_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "paf", version, about = "Popularity-amongst-friends recommender lab")]
struct Cli {
    /// Worker threads for trials and per-user evaluation (0 = all cores). Never
    /// changes results.
    #[arg(long, global = true, env = WORKERS_ENV, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw one latent model and its observation and write them as text.
    Generate(GenerateArgs),
    /// Monte Carlo BER of one parameter point.
    Simulate(SimulateArgs),
    /// BER across a grid of alpha or T values.
    Sweep(SweepArgs),
    /// Phase label and limiting BER for a parameter point.
    Theory(TheoryArgs),
    /// Train/test evaluation on a ratings file.
    Eval(EvalArgs),
}

/// Parameters of the block-constant model.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Users (rows).
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Items (columns); defaults to `n`.
    #[arg(long)]
    pub n_cols: Option<usize>,
    /// Cluster side length; must divide both sides.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Crossover probability of the noise channel, in [0, 1/2).
    #[arg(long, default_value_t = 0.2)]
    pub p: f64,
    /// Erasure scale: ε = 1 − c/n^α.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Erasure exponent.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "paf-out")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Paf,
    Oracle,
    Clustered,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Neighbours selected by PAF; defaults to `k`.
    #[arg(long = "T", alias = "t")]
    pub t: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Recommenders scored on the same draws.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "paf")]
    pub methods: Vec<MethodArg>,
    /// Redraw trials whose first latent row has no 1.
    #[arg(long)]
    pub require_nonzero_row: bool,
    #[arg(long, default_value = "paf-out")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Alpha,
    T,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "alpha")]
    pub mode: SweepMode,
    /// Comma-separated values and `start:stop:step` ranges, e.g. `0:0.8:0.05` or
    /// `2,5,10,20`.
    #[arg(long)]
    pub grid: String,
    /// Fixed T for alpha sweeps; defaults to `k`.
    #[arg(long = "T", alias = "t")]
    pub t: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub require_nonzero_row: bool,
    #[arg(long, default_value = "paf-out")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TheoryArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 0.2)]
    pub p: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Use this γ for the limits instead of α − ln k / ln n.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Half-width of the band around α = 1/2 reported as a boundary.
    #[arg(long, default_value_t = paf::harness::PHASE_TOLERANCE)]
    pub tol: f64,
    #[arg(long, default_value = "paf-out")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    /// `user::item::rating::timestamp`
    Movielens,
    /// `user,item,rating[,timestamp]`
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecommenderArg {
    Paf,
    Global,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidatesArg {
    Hidden,
    All,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// Ratings file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "movielens")]
    pub format: FormatArg,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "paf")]
    pub recommenders: Vec<RecommenderArg>,
    /// Neighbour counts for PAF, comma-separated.
    #[arg(long = "T", alias = "t", value_delimiter = ',', default_value = "100")]
    pub t: Vec<usize>,
    /// Cluster size for the cluster recommender.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Fraction of each user's ratings hidden for testing.
    #[arg(long, default_value_t = 0.3)]
    pub hide_frac: f64,
    /// Drop items whose training share of 1s exceeds this value.
    #[arg(long)]
    pub filter_popular: Option<f64>,
    #[arg(long, value_enum, default_value = "hidden")]
    pub candidates: CandidatesArg,
    /// Also report the RMSE of PAF rating predictions.
    #[arg(long)]
    pub rmse: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "paf-out")]
    #[serde(skip)]
    pub out: PathBuf,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad parameters or unreadable input: exit 2.
    Usage(String),
    /// Failure writing results: exit 1.
    Output(std::io::Error),
}

impl From<paf::Error> for CliError {
    fn from(e: paf::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
            eprintln!("error: cannot start {} workers: {e}", cli.workers);
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Theory(a) => commands::theory(a),
        Command::Eval(a) => commands::eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Output(e)) => {
            eprintln!("error: writing output: {e}");
            ExitCode::from(1)
        }
    }
}
