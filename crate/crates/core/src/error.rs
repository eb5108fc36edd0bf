use thiserror::Error;

use crate::power::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A power factor or compensation input outside `(0, 1]`.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("scenario failed validation:\n{0}")]
    Validation(ValidationReport),

    /// The joint action space is larger than the configured profile cap.
    #[error("joint action space has {profiles} profiles, above the cap of {cap}")]
    Capacity { profiles: u128, cap: u64 },

    #[error("2x2 indifference system is degenerate: {0}")]
    Degenerate(String),

    #[error("no sign change of PT-EUT utility gap on [{lo}, {hi}] (g(lo) = {g_lo}, g(hi) = {g_hi})")]
    NoSignChange { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown experiment id `{0}`")]
    UnknownExperiment(String),

    #[error("failed to parse {origin}: {source}")]
    Parse {
        origin: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
