use std::path::Path;

use regret_pricer::PricingError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("solver limit reached: {0}")]
    Limit(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Invalid(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Limit(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Pricing(e) => match e {
                PricingError::SolverLimit(_) => 3,
                PricingError::Internal(_) | PricingError::Solver(_) => 1,
                _ => 2,
            },
        }
    }
}
