use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("matrix is not positive definite (failing pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("infeasible moment-matching target at (m={m}, l={l}): {reason}")]
    InfeasibleTarget { m: usize, l: usize, reason: String },

    #[error("singular fixed-effects design; collinear columns {columns:?}")]
    SingularDesign { columns: Vec<usize> },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("row {row}: {message}")]
    Schema { row: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("trace too short: {len} values, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("no posterior samples to summarize")]
    NoSamples,

    #[error("structure generation failed: {0}")]
    Generation(String),

    #[error("iteration {iteration}: {source}")]
    Sampler {
        iteration: usize,
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

    /// Process exit code for the command-line tool: 2 for configuration
    /// problems, 3 for data problems, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter { .. } | Error::InfeasibleTarget { .. } => 2,
            Error::Parse { .. }
            | Error::Schema { .. }
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Dimension(_)
            | Error::TooShort { .. }
            | Error::NoSamples => 3,
            Error::NotPositiveDefinite { .. } | Error::SingularDesign { .. } | Error::Generation(_) => 4,
            Error::Sampler { source, .. } => match source.exit_code() {
                2 => 2,
                _ => 4,
            },
        }
    }
}
