use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("numerical instability: {0}")]
    NumericalInstability(String),
}

pub type MilpResult<T> = Result<T, MilpError>;
