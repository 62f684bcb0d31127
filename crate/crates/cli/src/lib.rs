//! Experiment driver for the `mburgers` binary: configuration files and the
//! `simulate`, `decompose`, `verify` and `convergence` runs.

pub mod config;
pub mod run;

pub use config::ExperimentConfig;
pub use run::{run_convergence, run_decompose, run_simulate, run_verify, CHECK_NAMES};

/// Failure of a run, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Tolerance(_) => 3,
        }
    }
}

impl From<mburgers_core::Error> for CliError {
    fn from(e: mburgers_core::Error) -> Self {
        use mburgers_core::Error as E;
        match e {
            E::InvalidParameter { .. } | E::Cfl(_) | E::NonPositiveTime(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
