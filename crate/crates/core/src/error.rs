use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate domain: rejection acceptance ratio {ratio:.3e} is below 1e-3")]
    DegenerateDomain { ratio: f64 },

    #[error("dual singular function evaluated at the vertex (r = {r:e})")]
    AtVertex { r: f64 },

    #[error("non-finite {what} at sample {index}")]
    NonFinite { index: usize, what: &'static str },

    #[error("non-finite loss during optimization at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("degenerate candidate: norm estimate {0:e} is too small")]
    DegenerateCandidate(f64),

    #[error("degenerate reference: norm estimate {0:e} is too small")]
    DegenerateReference(f64),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
