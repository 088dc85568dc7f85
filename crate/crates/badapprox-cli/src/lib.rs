//! Command line front end: configuration, run directories and reports.

pub mod commands;
pub mod config;
pub mod persist;
pub mod report;

use badapprox::algebraic::AlgebraicError;
use badapprox::cantor::CantorError;
use badapprox::certify::CertifyError;
use badapprox::dangerous::DangerError;
use badapprox::lattice::LatticeError;
use thiserror::Error;

pub use commands::with_pool;
pub use config::RunConfig;
pub use report::RunReport;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(String),
    #[error("level {q} is empty (t = {t}): {advice}")]
    LevelEmpty { q: u32, t: u32, advice: String },
    #[error(transparent)]
    Cantor(#[from] CantorError),
    #[error(transparent)]
    Certify(#[from] CertifyError),
    #[error(transparent)]
    Algebraic(#[from] AlgebraicError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Danger(#[from] DangerError),
}

impl CliError {
    /// Stable tag for structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::LevelEmpty { .. } => "level_empty",
            CliError::Cantor(CantorError::BudgetExceeded { .. }) => "budget_exceeded",
            CliError::Cantor(_) => "construction",
            CliError::Certify(_) => "certify",
            CliError::Algebraic(_) => "algebraic",
            CliError::Lattice(_) => "lattice",
            CliError::Danger(_) => "danger",
        }
    }

    /// Process exit code: 2 for bad input, 3 for an empty or over-budget construction, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::LevelEmpty { .. } | CliError::Cantor(CantorError::BudgetExceeded { .. }) => 3,
            _ => 1,
        }
    }
}
