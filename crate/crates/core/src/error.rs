use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("divergence at step {step}: non-finite state")]
    Divergence { step: usize },

    #[error("malformed field file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),

    /// Wraps an error raised while evaluating one sweep point.
    #[error("sweep point (n_coarse={n_coarse}, J={n_basis}, layers={layers}): {source}")]
    SweepPoint {
        n_coarse: usize,
        n_basis: usize,
        layers: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 configuration, 2 numerical failure, 3 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Domain(_)
            | Error::Singular(_)
            | Error::RankDeficient(_)
            | Error::Divergence { .. }
            | Error::Internal(_) => 2,
            Error::Format { .. } | Error::Io { .. } => 3,
            Error::SweepPoint { source, .. } => source.exit_code(),
        }
    }
}
