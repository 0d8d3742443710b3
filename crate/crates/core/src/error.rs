use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("infeasible assignment: {features} features cannot cover {concepts} concepts")]
    Infeasible { features: usize, concepts: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("validation error at row {row}, column `{column}`: {message}")]
    Validation {
        row: usize,
        column: String,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("singular design matrix: {0}")]
    SingularDesign(String),

    #[error("Fisher transform undefined for r = {0}")]
    TransformUndefined(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
