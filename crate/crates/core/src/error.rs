use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("objective is not finite at {point}")]
    NonFinite { point: f64 },

    #[error("codeword {codeword} has zero probability for sensor {sensor}")]
    ZeroProbability { sensor: usize, codeword: usize },

    #[error("weights orthogonal to attack direction")]
    OrthogonalWeights,

    #[error("inconsistent prior: alpha is 0 but the attack estimate is {x_hat}")]
    InconsistentPrior { x_hat: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
