use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the modelling kernel.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("series needs at least two nodes, got {0}")]
    EmptySeries(usize),

    #[error("year {0} is not covered")]
    MissingYear(i32),

    #[error("range {from}..{to} is not covered by the series")]
    Range { from: f64, to: f64 },

    #[error("residual demand exceeds available supply by {shortfall_twh:.3} TWh")]
    InfeasibleDispatch { shortfall_twh: f64 },

    #[error("optimization infeasible: {0}")]
    Infeasible(String),

    #[error("LP has not been solved")]
    NotSolved,

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("scenario `{0}` is missing")]
    MissingScenario(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
