//! Error types shared by every stage of the pipeline.

use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl ErrorClass {
    /// Process exit code for this class (0 is reserved for success).
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("calendar construction failed: {0}")]
    Calendar(String),

    #[error("{file}:{line}: column `{column}`: {message}")]
    Schema { file: String, line: u64, column: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {file}: {message}")]
    Csv { file: String, message: String },

    #[error("universe is empty after filtering ({summary})")]
    EmptyUniverse { summary: String },

    #[error("invalid design matrix: {0}")]
    Design(String),

    #[error("singular fit (condition number {condition:.3e}); offending columns: {}", columns.join(", "))]
    SingularFit { condition: f64, columns: Vec<String> },

    #[error("cannot standardize zero-variance column `{0}`")]
    ZeroVariance(String),

    #[error("missing regressor `{0}`")]
    MissingRegressor(String),

    #[error("no fit available as of {as_of}: {have} observations, need {need}")]
    InsufficientObservations { as_of: NaiveDate, have: usize, need: usize },

    #[error("undefined Sharpe ratio: {0}")]
    UndefinedSharpe(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite objective value at the starting point")]
    NonFiniteObjective,

    #[error("return series contains a value <= -1 at position {0}")]
    TotalLoss(usize),

    #[error("period {start}..{end} is outside data coverage ({detail})")]
    Coverage { start: NaiveDate, end: NaiveDate, detail: String },

    #[error("misaligned series; missing months: {}", fmt_months(.0))]
    Misaligned(Vec<NaiveDate>),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn fmt_months(months: &[NaiveDate]) -> String {
    months.iter().map(|d| d.format("%Y-%m").to_string()).collect::<Vec<_>>().join(", ")
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::SingularFit { .. }
            | Error::UndefinedSharpe(_)
            | Error::NonFiniteObjective
            | Error::ZeroVariance(_)
            | Error::InsufficientObservations { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
