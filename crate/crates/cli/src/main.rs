use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mburgers_cli::{
    run_convergence, run_decompose, run_simulate, run_verify, CliError, ExperimentConfig,
};

/// Experiment runner for the modified Burgers equation.
#[derive(Debug, Parser)]
#[command(name = "mburgers", version)]
struct Cli {
    /// Print the default configuration as TOML and exit.
    #[arg(long, global = true)]
    print_defaults: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML configuration; omitted sections take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory, overriding `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve and compare with the Cole–Hopf solution.
    Simulate(Common),
    /// Split the solution into plateau and remainder.
    Decompose(Common),
    /// Run numerical checks of the kernel and decay estimates.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Comma-separated check names, or `all`.
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
    },
    /// Spatial convergence study against Cole–Hopf.
    Convergence(Common),
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| config.output.dir.clone());
    Ok((config, out))
}

fn dispatch(command: Command) -> Result<serde_json::Map<String, serde_json::Value>, CliError> {
    match command {
        Command::Simulate(common) => {
            let (config, out) = load(&common)?;
            run_simulate(&config, &out)
        }
        Command::Decompose(common) => {
            let (config, out) = load(&common)?;
            run_decompose(&config, &out)
        }
        Command::Verify { common, checks } => {
            let (config, out) = load(&common)?;
            run_verify(&config, &checks, &out)
        }
        Command::Convergence(common) => {
            let (config, out) = load(&common)?;
            run_convergence(&config, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_defaults {
        print!("{}", ExperimentConfig::default().to_toml());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: no command given; try `mburgers --help`");
        return ExitCode::from(1);
    };
    match dispatch(command) {
        Ok(summary) => {
            let status = summary
                .get("status")
                .and_then(|s| s.as_str())
                .unwrap_or("ok");
            eprintln!("{status}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
