use thiserror::Error;

/// Errors surfaced by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate singularity: {0}")]
    CoordinateSingularity(String),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    #[error("divergent functional: {0}")]
    DivergentFunctional(String),

    #[error("unsupported primitive: {0}")]
    UnsupportedPrimitive(String),

    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate correction: {0}")]
    DegenerateCorrection(String),

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
