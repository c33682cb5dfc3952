//! Crate-wide error type, split by how the CLI maps failures to exit codes:
//! configuration problems exit 2, numerical diagnostics exit 3.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad user input: unparseable spec strings, invalid flag values,
    /// violated operation preconditions.
    #[error("config: {0}")]
    Config(String),

    /// A regenerative cycle exceeded the step cap. Truncating would bias a
    /// ratio estimator, so the run aborts loudly instead.
    #[error("cycle exceeded {cap} steps; model looks non-recurrent (check rho and arrival support)")]
    CycleCap { cap: u64 },

    /// The importance-sampling kernel detected an inconsistency at run time,
    /// e.g. a branch probability above 1 after calibration.
    #[error("importance kernel misconfigured: {0}")]
    Kernel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn kernel(msg: impl Into<String>) -> Self {
        Error::Kernel(msg.into())
    }

    /// CLI exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::CycleCap { .. } | Error::Kernel(_) | Error::Io(_) => 3,
        }
    }
}
