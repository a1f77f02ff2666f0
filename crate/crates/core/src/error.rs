use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing required column `{0}`")]
    Schema(String),

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("configuration: {0}")]
    Config(String),

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("estimation failed: {0}")]
    Estimation(#[from] EstimationError),

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("rank-deficient design: term `{term}` is collinear with earlier columns")]
    RankDeficient { term: String },

    #[error("perfect separation detected on term `{term}`")]
    Separation { term: String },

    #[error("IRLS did not converge after {iterations} iterations (max |step| trace: {trace:?})")]
    NonConvergence { iterations: usize, trace: Vec<f64> },

    #[error("need at least {needed} {what}, found {found}")]
    TooSmall {
        what: &'static str,
        needed: usize,
        found: usize,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 estimation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Estimation(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
            Error::Schema(_)
            | Error::Row { .. }
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::EmptySample(_)
            | Error::Contract(_) => 3,
        }
    }
}
