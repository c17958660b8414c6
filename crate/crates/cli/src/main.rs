mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::FileConfig;

#[derive(Debug, Parser)]
#[command(name = "assortify", version, about = "Revenue and sustainability assortment planning")]
struct Cli {
    /// TOML settings file; flags and ASSORTIFY_* variables override it.
    #[arg(long, global = true, env = "ASSORTIFY_CONFIG")]
    config: Option<PathBuf>,

    /// Log filter, e.g. `info` or `assortify=debug`.
    #[arg(long, global = true, env = "ASSORTIFY_LOG", default_value = "warn")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset (four input files and a manifest).
    Generate(GenerateArgs),
    /// Score every product and write the Higg scores and their histogram.
    Score(ScoreArgs),
    /// Fit the demand model and write the completed demand matrix.
    Fit(FitArgs),
    /// Sweep the trade-off weight per store and write fronts and compositions.
    Pareto(ParetoArgs),
    /// Serve the HTTP API until interrupted.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Directory holding fabrics.csv, stores.csv, products.csv and sales.csv.
    #[arg(long, env = "ASSORTIFY_DATA_DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, env = "ASSORTIFY_FABRICS")]
    pub fabrics: Option<PathBuf>,
    #[arg(long, env = "ASSORTIFY_STORES")]
    pub stores: Option<PathBuf>,
    #[arg(long, env = "ASSORTIFY_PRODUCTS")]
    pub products: Option<PathBuf>,
    #[arg(long, env = "ASSORTIFY_SALES")]
    pub sales: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AlsArgs {
    /// Latent dimension [default: 8]
    #[arg(long, env = "ASSORTIFY_RANK")]
    pub rank: Option<usize>,
    /// Regularization weight [default: 0.1]
    #[arg(long, env = "ASSORTIFY_REG_LAMBDA")]
    pub reg_lambda: Option<f64>,
    /// Maximum sweeps [default: 20]
    #[arg(long, env = "ASSORTIFY_N_ITERATIONS")]
    pub n_iterations: Option<usize>,
    /// Random seed [default: 0]
    #[arg(long, env = "ASSORTIFY_SEED")]
    pub seed: Option<u64>,
    /// Half-width of the uniform factor initialization [default: 0.1]
    #[arg(long, env = "ASSORTIFY_INIT_SCALE")]
    pub init_scale: Option<f64>,
    /// Stop when the relative loss change falls below this [default: 1e-5]
    #[arg(long, env = "ASSORTIFY_CONVERGENCE_TOL")]
    pub convergence_tol: Option<f64>,
    /// Multiplier applied to the completed demand [default: 1.0]
    #[arg(long, env = "ASSORTIFY_TREND_SCALAR")]
    pub trend_scalar: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Output directory.
    #[arg(long, env = "ASSORTIFY_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// `default`, `three-peak` (1 kg products) or `demo` (two products).
    #[arg(long, env = "ASSORTIFY_PRESET")]
    pub preset: Option<String>,
    #[arg(long, env = "ASSORTIFY_SEED")]
    pub seed: Option<u64>,
    #[arg(long = "n-products", env = "ASSORTIFY_N_PRODUCTS")]
    pub n_products: Option<usize>,
    #[arg(long = "n-stores", env = "ASSORTIFY_N_STORES")]
    pub n_stores: Option<usize>,
    /// Rank of the ground-truth demand.
    #[arg(long, env = "ASSORTIFY_GENERATOR_RANK")]
    pub rank: Option<usize>,
    /// Noise as a fraction of the ground-truth standard deviation.
    #[arg(long, env = "ASSORTIFY_NOISE_SIGMA")]
    pub noise_sigma: Option<f64>,
    /// Probability that a sales cell is observed.
    #[arg(long, env = "ASSORTIFY_DENSITY")]
    pub density: Option<f64>,
    #[arg(long, env = "ASSORTIFY_WEIGHT_MIN_KG")]
    pub weight_min_kg: Option<f64>,
    #[arg(long, env = "ASSORTIFY_WEIGHT_MAX_KG")]
    pub weight_max_kg: Option<f64>,
    /// Fabric populations as `fabric:index:share`, comma separated.
    #[arg(long, env = "ASSORTIFY_POPULATIONS", value_delimiter = ',')]
    pub populations: Option<Vec<String>>,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, env = "ASSORTIFY_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Histogram bins [default: 20]
    #[arg(long, env = "ASSORTIFY_BINS")]
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub als: AlsArgs,
    #[arg(long, env = "ASSORTIFY_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Fraction of observations held out to measure prediction error.
    #[arg(long, env = "ASSORTIFY_HOLDOUT")]
    pub holdout: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ParetoArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub als: AlsArgs,
    #[arg(long, env = "ASSORTIFY_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Factor model from `fit`; fitted inline when absent.
    #[arg(long, env = "ASSORTIFY_MODEL")]
    pub model: Option<PathBuf>,
    /// Assortment size [default: 10]
    #[arg(short, long, env = "ASSORTIFY_K")]
    pub k: Option<usize>,
    /// Evenly spaced trade-off values from 0 to 1 [default: 101]
    #[arg(long, env = "ASSORTIFY_GRID_POINTS", conflicts_with = "lambdas")]
    pub grid_points: Option<usize>,
    /// Explicit ascending trade-off values.
    #[arg(long, env = "ASSORTIFY_LAMBDAS", value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Store ids to process [default: all]
    #[arg(long = "store", env = "ASSORTIFY_STORE_IDS", value_delimiter = ',')]
    pub store_ids: Option<Vec<String>>,
    /// Min-max rescale both objectives [default: true]
    #[arg(long, env = "ASSORTIFY_NORMALIZE")]
    pub normalize: Option<bool>,
    /// Worker threads [default: available parallelism]
    #[arg(long, env = "ASSORTIFY_WORKERS")]
    pub workers: Option<usize>,
    /// Trade-off values at which fabric compositions are written [default: 0,0.5,1]
    #[arg(long, env = "ASSORTIFY_COMPOSITION_LAMBDAS", value_delimiter = ',')]
    pub composition_lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Factor model from `fit`.
    #[arg(long, env = "ASSORTIFY_MODEL")]
    pub model: Option<PathBuf>,
    /// Multiplier applied to the completed demand [default: 1.0]
    #[arg(long, env = "ASSORTIFY_TREND_SCALAR")]
    pub trend_scalar: Option<f64>,
    /// Bind address [default: 127.0.0.1:8080]
    #[arg(long, env = "ASSORTIFY_ADDR")]
    pub addr: Option<String>,
    /// Send permissive cross-origin headers.
    #[arg(long, env = "ASSORTIFY_CORS")]
    pub cors: bool,
}

/// A failed command: exit code 1 for bad input, 2 for internal errors.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: String,
    pub message: String,
}

impl Failure {
    pub fn input(kind: &str, message: impl Into<String>) -> Self {
        Self { code: 1, kind: kind.to_string(), message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self { code: 2, kind: "Internal".into(), message: message.into() }
    }
}

impl From<assortify::Error> for Failure {
    fn from(err: assortify::Error) -> Self {
        Self::input(err.kind(), err.to_string())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(args) => commands::generate(&args, &file),
        Command::Score(args) => commands::score(&args, &file),
        Command::Fit(args) => commands::fit(&args, &file),
        Command::Pareto(args) => commands::pareto(&args, &file),
        Command::Serve(args) => commands::serve(&args, &file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = tracing_subscriber::EnvFilter::try_new(&cli.log).unwrap_or_else(|_| "warn".into());
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();

    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(failure)) => {
            eprintln!("error[{}]: {}", failure.kind, failure.message);
            ExitCode::from(failure.code)
        }
        Err(_) => ExitCode::from(2),
    }
}
