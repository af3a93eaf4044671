use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument error: {0}")]
    Argument(String),

    /// Curvature vector outside the admissible cone; carries the first
    /// defining inequality that failed.
    #[error("cone violation: {0}")]
    Cone(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("validation failure: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
