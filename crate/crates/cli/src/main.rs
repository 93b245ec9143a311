//! `fou`: simulation, estimation and expansion-density tools for the
//! fractional Ornstein-Uhlenbeck process.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.

mod commands;
mod settings;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use settings::{EstimatorArgs, HorizonArgs, McArgs, ModelArgs, OutArgs, QuadArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] fou_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fou", version, about = "Drift estimation for the fractional Ornstein-Uhlenbeck process")]
struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, env = "FOU_THREADS")]
    threads: Option<usize>,
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one path on the grid; CSV columns t,value.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        horizon: HorizonArgs,
        #[command(flatten)]
        extra: SimulateArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Estimate θ from a CSV path with columns t,value on a uniform grid.
    Estimate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        extra: EstimateArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Expansion constants as JSON (and optionally one CSV row).
    Constants {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        quad: QuadArgs,
        #[command(flatten)]
        extra: ConstantsArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Normal and expansion densities on a grid.
    Density {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        horizon: HorizonArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        quad: QuadArgs,
        #[command(flatten)]
        extra: DensityArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Monte Carlo study of the scaled estimation error.
    Mc {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        horizon: HorizonArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        quad: QuadArgs,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Closed-form c0 against its quadrature; CSV.
    VerifyConstants {
        #[command(flatten)]
        quad: QuadArgs,
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Finite-T gamma factor against c0 + c2 T^(4H-3); CSV.
    VerifyGamma {
        #[command(flatten)]
        quad: QuadArgs,
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Monte Carlo study at one of the figure configurations (θ=2, σ=1, x0=0).
    ReproduceFigure {
        #[command(flatten)]
        extra: FigureArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        quad: QuadArgs,
        #[command(flatten)]
        mc: McArgs,
    },
}

#[derive(Debug, Clone, Default, Args, Serialize)]
struct SimulateArgs {
    /// Root seed (default 1).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Stream index (default 0).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    stream: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
struct EstimateArgs {
    /// CSV file with header t,value.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
struct ConstantsArgs {
    /// Also write the constants as a one-row CSV file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    csv: Option<PathBuf>,
    /// Compute c3' also for 5/8 < H < 2/3, where the density does not use it.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    with_c3: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
struct DensityArgs {
    /// Evaluation grid lo:hi:n (default -4:4:401).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
struct LatticeArgs {
    /// Comma-separated θ values.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    thetas: Option<String>,
    /// Comma-separated Hurst indices.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    hs: Option<String>,
    /// Comma-separated horizons (verify-gamma only).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    horizons: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
struct FigureArgs {
    /// Figure configuration 1..8.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<u32>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(summary) => {
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Invalid("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    }
    let cfg = cli.config.as_deref();
    use settings::{group as g, merge};
    match cli.command {
        Command::Simulate { model, horizon, extra, out } => {
            commands::simulate(&merge(cfg, &[g(&model), g(&horizon), g(&extra), g(&out)])?)
        }
        Command::Estimate { model, estimator, extra, out } => {
            commands::estimate(&merge(cfg, &[g(&model), g(&estimator), g(&extra), g(&out)])?)
        }
        Command::Constants { model, estimator, quad, extra, out } => commands::constants(&merge(
            cfg,
            &[g(&model), g(&estimator), g(&quad), g(&extra), g(&out)],
        )?),
        Command::Density { model, horizon, estimator, quad, extra, out } => commands::density(&merge(
            cfg,
            &[g(&model), g(&horizon), g(&estimator), g(&quad), g(&extra), g(&out)],
        )?),
        Command::Mc { model, horizon, estimator, quad, mc } => {
            commands::mc(&merge(cfg, &[g(&model), g(&horizon), g(&estimator), g(&quad), g(&mc)])?)
        }
        Command::VerifyConstants { quad, lattice, out } => {
            commands::verify_constants(&merge(cfg, &[g(&quad), g(&lattice), g(&out)])?)
        }
        Command::VerifyGamma { quad, lattice, out } => {
            commands::verify_gamma(&merge(cfg, &[g(&quad), g(&lattice), g(&out)])?)
        }
        Command::ReproduceFigure { extra, estimator, quad, mc } => {
            commands::reproduce_figure(&merge(cfg, &[g(&extra), g(&estimator), g(&quad), g(&mc)])?)
        }
    }
}
