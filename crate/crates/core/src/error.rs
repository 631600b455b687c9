use thiserror::Error;

/// Failures surfaced by the toolkit. The CLI maps each variant onto an exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("density vanishes on cell {cell}")]
    SingularDensity { cell: usize },

    #[error("unsupported: {0}")]
    Capability(String),

    #[error("degenerate CLT: Sigma^2_n / n = {ratio:e} is below the threshold")]
    DegenerateClt { ratio: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }
}
