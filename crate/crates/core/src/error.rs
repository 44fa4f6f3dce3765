use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A power factor with exponent `exponent <= -dim` has its singular point
    /// inside the integration region.
    #[error(
        "non-integrable weight: exponent {exponent} at ({cx}, {cy}) inside ball of radius {radius}"
    )]
    NonIntegrable {
        exponent: f64,
        cx: f64,
        cy: f64,
        radius: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate weight: {0}")]
    DegenerateWeight(String),

    #[error("singular point: {0}")]
    SingularPoint(String),

    #[error("growth fit needs at least 3 refinement levels, got {0}")]
    TooFewLevels(usize),

    #[error("input has zero norm")]
    ZeroNorm,

    #[error("input has infinite norm")]
    InfiniteNorm,

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
