use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KnockoffError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("blocking plan does not cover every variable: {0}")]
    Coverage(String),
    #[error("fold sizes invalid: {0}")]
    FoldSize(String),
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),
    #[error("cut strategy failed: {0}")]
    Strategy(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl KnockoffError {
    /// True for errors caused by inputs violating a documented precondition.
    pub fn is_precondition(&self) -> bool {
        !matches!(self, KnockoffError::Io(_))
    }
}

impl From<std::io::Error> for KnockoffError {
    fn from(e: std::io::Error) -> Self {
        KnockoffError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, KnockoffError>;
