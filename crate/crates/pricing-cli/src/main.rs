use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use pricing_cli::commands::{
    cmd_bounds, cmd_crossval, cmd_fit, cmd_simulate, cmd_tightness, CrossvalArgs, FitArgs,
    SimulateArgs,
};
use pricing_cli::config::Config;
use pricing_cli::experiment::{run_experiment, write_experiment, ExperimentConfig};
use pricing_cli::UsageError;

#[derive(Parser)]
#[command(
    name = "pricing",
    version,
    about = "Surrogate-loss contextual pricing: guarantees, fits, and simulation studies",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Worst-case revenue-ratio guarantee over a parameter grid
    Bounds {
        /// Guarantee family: hinge or quantile
        #[arg(long)]
        kind: String,
        /// Smallest grid parameter
        #[arg(long)]
        min: f64,
        /// Largest grid parameter
        #[arg(long)]
        max: f64,
        /// Number of evenly spaced grid points (1 needs min == max)
        #[arg(long)]
        steps: usize,
        /// Output CSV path (param,value,branch)
        #[arg(long)]
        out: PathBuf,
    },
    /// Check branch bounds against their extremal distributions
    Tightness {
        /// hinge_below, hinge_above, quantile_below, or quantile_above
        #[arg(long)]
        kind: String,
        /// Comma-separated parameters; invalid ones become flagged rows
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        params: Vec<f64>,
        /// Output CSV path (param,bound,achieved,gap,case)
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one fixed-loss linear policy on a dataset CSV
    Fit {
        /// Input dataset CSV (x0..,price,sold[,propensity])
        #[arg(long)]
        data: PathBuf,
        /// hinge:c, quantile:tau, eps:c1:c2, kernel_ipw[:h], or model_free
        #[arg(long)]
        loss: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output policy CSV path
        #[arg(long)]
        out: PathBuf,
        /// Logging-density family to attach when the CSV lacks propensities:
        /// uniform, triangular, exponential, or lognormal
        #[arg(long)]
        propensity_model: Option<String>,
        /// Comma-separated parameters for --propensity-model:
        /// uniform lo,hi; triangular lo,mode,hi; exponential rate[,location];
        /// lognormal mu,sigma
        #[arg(long, value_delimiter = ',')]
        propensity_params: Vec<f64>,
    },
    /// Tune a loss family over its default grid by estimated revenue
    Crossval {
        /// Input dataset CSV
        #[arg(long)]
        data: PathBuf,
        /// Loss family: hinge, quantile, or eps
        #[arg(long)]
        loss: String,
        /// Demand model scoring the grid: logistic or kernel
        #[arg(long, default_value = "logistic")]
        demand: String,
        /// Demand fits see at most this many (stride-subsampled) rows
        #[arg(long, default_value_t = 2_000)]
        demand_cap: usize,
        /// Revenue scoring uses at most this many training rows
        #[arg(long, default_value_t = 5_000)]
        eval_cap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (param1,param2,estimated_revenue,chosen)
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        propensity_model: Option<String>,
        #[arg(long, value_delimiter = ',')]
        propensity_params: Vec<f64>,
    },
    /// Run a simulation study from a key = value config file
    Experiment {
        /// Config path; see README for the key reference
        config: PathBuf,
    },
    /// Generate one synthetic posted-price dataset CSV
    Simulate {
        /// uniform_band or shifted_exponential
        #[arg(long)]
        family: String,
        /// Index driving the conditional valuation: linear or step
        #[arg(long)]
        g: String,
        /// Number of samples
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output dataset CSV path
        #[arg(long)]
        out: PathBuf,
        /// Logging law (default: the family's standard law):
        /// uniform, triangular, exponential, or lognormal
        #[arg(long)]
        price: Option<String>,
        /// Comma-separated parameters for --price (same arities as
        /// --propensity-params)
        #[arg(long, value_delimiter = ',')]
        price_params: Vec<f64>,
        /// Override the square feature law's lower corner
        #[arg(long)]
        feature_lo: Option<f64>,
        /// Override the square feature law's upper corner
        #[arg(long)]
        feature_hi: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Bounds { kind, min, max, steps, out } => cmd_bounds(&kind, min, max, steps, &out),
        Cmd::Tightness { kind, params, out } => cmd_tightness(&kind, &params, &out),
        Cmd::Fit { data, loss, seed, out, propensity_model, propensity_params } => {
            cmd_fit(&FitArgs { data, loss, seed, out, propensity_model, propensity_params })
        }
        Cmd::Crossval {
            data,
            loss,
            demand,
            demand_cap,
            eval_cap,
            seed,
            out,
            propensity_model,
            propensity_params,
        } => cmd_crossval(&CrossvalArgs {
            data,
            loss,
            demand,
            demand_cap,
            eval_cap,
            seed,
            out,
            propensity_model,
            propensity_params,
        }),
        Cmd::Experiment { config } => {
            let cfg = Config::from_file(&config)?;
            let exp = ExperimentConfig::from_config(&cfg)?;
            let output = run_experiment(&exp)?;
            let (results_path, summary_path) = write_experiment(&exp, &output)?;
            println!(
                "wrote {} result rows to {} and {} summary rows to {}",
                output.results.len(),
                results_path.display(),
                output.summary.len(),
                summary_path.display(),
            );
            Ok(())
        }
        Cmd::Simulate { family, g, n, seed, out, price, price_params, feature_lo, feature_hi } => {
            cmd_simulate(&SimulateArgs {
                family,
                g,
                n,
                seed,
                out,
                price,
                price_params,
                feature_lo,
                feature_hi,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
