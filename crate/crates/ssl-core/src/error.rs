use thiserror::Error;

/// Library error type. Sampler divergence (NaN/inf states) is not an `Error`:
/// it is recorded per chain in the run output so one bad chain cannot hide
/// the rest of an experiment.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// A request is structurally valid but not supported (e.g. quadrature in d > 2).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numerical routine could not deliver its contract (e.g. a density
    /// failed its mass check even after widening the grid).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
