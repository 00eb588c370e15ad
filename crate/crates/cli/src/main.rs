//! `symcl`: simulate, aggregate, fit and report symbolic composite likelihood runs.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "symcl", version, about = "Symbolic composite likelihood for histogram-valued extremes")]
struct Cli {
    /// Worker threads for all parallel stages (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for every random draw of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a Smith max-stable process at random sites.
    Simulate(SimulateArgs),
    /// Aggregate micro-data into a series of sparse histograms.
    Aggregate(AggregateArgs),
    /// Fit the Smith model by symbolic (or classic) composite likelihood.
    Fit(FitArgs),
    /// Add sensitivity, variability and Godambe matrices and standard errors to a fit.
    Variance(VarianceArgs),
    /// Write return levels, qq pairs, term counts and replicate summaries as CSV.
    Report(ReportArgs),
    /// Time histogram construction, symbolic and classic fits.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginKind {
    Constant,
    Spatial,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Number of sites.
    #[arg(long = "K")]
    pub k: usize,
    /// Number of realisations.
    #[arg(long = "N")]
    pub n: usize,
    /// Dependence matrix entries s11,s12,s22.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Vec<f64>,
    /// Margins: mu,sigma,xi (constant) or a0,a1,a2,b0,b1,b2,xi (linear in the coordinates).
    #[arg(long, value_delimiter = ',', default_value = "0,1,0")]
    pub margins: Vec<f64>,
    /// Sampling window xmin,xmax,ymin,ymax.
    #[arg(long, value_delimiter = ',', default_value = "0,40,0,40")]
    pub window: Vec<f64>,
    /// Replicate index; replicates share the site layout.
    #[arg(long, default_value_t = 0)]
    pub replicate: u64,
    /// Output directory for sites.csv, data.csv and simulation.json.
    #[arg(long, short, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AggregateArgs {
    /// Micro-data CSV (header of site ids).
    pub input: PathBuf,
    /// Equal-width bins per margin.
    #[arg(long, default_value_t = 25)]
    pub bins: usize,
    /// Number of histograms.
    #[arg(long = "T", default_value_t = 1)]
    pub t: usize,
    /// Take block maxima over this many consecutive rows first.
    #[arg(long)]
    pub block_len: Option<usize>,
    /// Remove a per-site linear trend in the row index (after block maxima).
    #[arg(long)]
    pub detrend: bool,
    /// Clamp values outside the grid into the edge bins instead of failing.
    #[arg(long)]
    pub clamp: bool,
    /// Explicit breakpoints as a JSON array of arrays, one per margin.
    #[arg(long)]
    pub breaks: Option<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Histogram JSON, or micro-data CSV with --classic.
    pub input: PathBuf,
    /// Sites CSV (id,x,y) in column order.
    #[arg(long)]
    pub sites: PathBuf,
    /// Composite order: 2 (pairwise) or 3 (triplewise).
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub order: u8,
    #[arg(long, value_enum, default_value_t = MarginKind::Constant)]
    pub margins: MarginKind,
    /// Fit the micro-data directly with finite-difference densities.
    #[arg(long)]
    pub classic: bool,
    /// Starting values, comma separated in parameter order.
    #[arg(long, value_delimiter = ',')]
    pub theta0: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct VarianceArgs {
    /// Fit JSON produced by `fit`.
    #[arg(long)]
    pub fit: PathBuf,
    /// Histogram JSON, or micro-data CSV (aggregated with --bins/--T, or used directly with --classic).
    pub input: PathBuf,
    #[arg(long)]
    pub sites: PathBuf,
    /// Re-aggregate micro-data into this many histograms.
    #[arg(long = "T")]
    pub t: Option<usize>,
    /// Bins per margin when re-aggregating micro-data.
    #[arg(long, default_value_t = 25)]
    pub bins: usize,
    #[arg(long)]
    pub classic: bool,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Fit JSON for return levels and qq pairs.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    #[arg(long)]
    pub sites: Option<PathBuf>,
    /// Micro-data CSV for qq pairs.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Return period in years.
    #[arg(long, default_value_t = 95.0)]
    pub years: f64,
    #[arg(long, default_value_t = 1.0)]
    pub blocks_per_year: f64,
    /// Term counts for N,K,order[,B].
    #[arg(long, value_delimiter = ',')]
    pub terms: Option<Vec<u64>>,
    /// Fit JSON files of independent replicates to summarise.
    #[arg(long, num_args = 1..)]
    pub replicates: Vec<PathBuf>,
    /// True parameter values for the replicate summary.
    #[arg(long, value_delimiter = ',')]
    pub truth: Option<Vec<f64>>,
    #[arg(long, short, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long = "K", default_value_t = 10)]
    pub k: usize,
    /// Sample sizes to time.
    #[arg(long = "N", value_delimiter = ',', default_value = "1000,10000")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 25)]
    pub bins: usize,
    #[arg(long = "T", default_value_t = 1)]
    pub t: usize,
    #[arg(long, value_delimiter = ',', default_value = "300,0,300")]
    pub sigma: Vec<f64>,
    /// Iteration cap applied to both fits.
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
    /// Skip the classic fit.
    #[arg(long)]
    pub no_classic: bool,
    #[arg(long, short)]
    pub output: PathBuf,
}

/// Exit codes: 2 usage (clap), 3 data error, 4 numerical failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<symcl::Error>() {
            return if e.is_numerical() { 4 } else { 3 };
        }
        if cause.downcast_ref::<commands::UsageError>().is_some() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("error: cannot start thread pool: {e}");
        return ExitCode::from(3);
    }
    let ctx = commands::Context { seed: cli.seed, threads };
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Aggregate(a) => commands::aggregate(&ctx, a),
        Command::Fit(a) => commands::fit(&ctx, a),
        Command::Variance(a) => commands::variance(&ctx, a),
        Command::Report(a) => commands::report(&ctx, a),
        Command::Bench(a) => commands::bench(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
