use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Occupation or index outside a mode's truncation.
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("configuration error: {0}")]
    Config(String),
    /// Requested object would exceed the configured size cap.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    /// Truncation too small for the requested operation.
    #[error("truncation error: {0}")]
    Truncation(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl Error {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Shape(_) => "shape",
            Error::Argument(_) => "argument",
            Error::Validation(_) => "validation",
            Error::Config(_) => "config",
            Error::Resource(_) => "resource",
            Error::Truncation(_) => "truncation",
            Error::Numerical(_) => "numerical",
        }
    }
}
