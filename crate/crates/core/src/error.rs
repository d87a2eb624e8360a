use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid probability object: {0}")]
    Probability(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("state left the simplex: {0}")]
    SimplexEscape(String),

    #[error("eigensolver did not converge for a {0}x{0} matrix")]
    NoConvergence(usize),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
