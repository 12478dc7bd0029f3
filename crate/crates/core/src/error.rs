use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spatial dimension {0} is not supported (expected 1, 2 or 3)")]
    DimensionUnsupported(usize),

    #[error("{0} is undefined for an infinite horizon")]
    InfiniteHorizon(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("horizon {delta} is smaller than one cell of width {h}; refine the mesh")]
    HorizonUnderresolved { delta: f64, h: f64 },

    #[error("invalid function: {0}")]
    InvalidFunction(String),

    #[error("mesh horizon {mesh} does not match kernel horizon {params}")]
    InconsistentHorizon { mesh: String, params: String },

    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    #[error("exponent p = {0} is not supported here (p = 2 required)")]
    WrongExponent(f64),

    #[error("assembly corruption: {0}")]
    AssemblyCorruption(String),

    #[error("oracle failure: {0}")]
    OracleFailure(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
