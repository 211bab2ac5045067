use pricer_milp::MilpError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("recovered price of item {item} for buyer {buyer} is negative ({price})")]
    NegativePrice { buyer: usize, item: usize, price: f64 },
    #[error("candidate is infeasible under scenario {scenario}: {reason}")]
    InfeasibleScenario { scenario: usize, reason: String },
    #[error("{what} exceeds the enumeration cap ({actual} > {limit})")]
    CapExceeded {
        what: &'static str,
        limit: usize,
        actual: usize,
    },
    #[error("solver did not reach optimality: {0}")]
    SolverLimit(String),
    #[error(transparent)]
    Solver(#[from] MilpError),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, PricingError>;
