use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("singular matrix: pivot {pivot:e} in column {column}")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("negative rate {value:e} at ({row}, {col})")]
    NegativeRate { row: usize, col: usize, value: f64 },

    #[error("invariant has zero initial value")]
    ZeroInitialInvariant,

    #[error("unknown {kind} '{name}'")]
    UnknownName { kind: &'static str, name: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("stage solver did not converge after {iterations} iterations (residual {residual:e})")]
    StageNonConvergence { iterations: usize, residual: f64 },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for errors caused by bad input rather than by the integration.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::UnknownName { .. } | Error::DimensionMismatch(_) | Error::ZeroInitialInvariant
        )
    }
}
