use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A row that could not be parsed or violates a per-row invariant.
    #[error("{file}:{line}: {message}")]
    MalformedRow {
        file: String,
        line: u64,
        message: String,
    },

    /// A file whose header or structure does not match the expected schema.
    #[error("schema mismatch in {file}: {message}")]
    Schema { file: String, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("focal paper {0} has no references")]
    ZeroReferenceFocal(String),

    #[error("disruption score undefined for {0}: no citing or coupled papers in window")]
    UndefinedScore(String),

    #[error("dependent variable has zero variance on the estimation rows")]
    ZeroVariance,

    #[error("design matrix is rank deficient; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("too few observations: n = {n}, columns = {k}")]
    TooFewObservations { n: usize, k: usize },

    #[error("need at least two clusters, found {0}")]
    TooFewClusters(usize),

    #[error("universe is not full factorial; missing cells: {}", .0.join("; "))]
    NonFactorial(Vec<String>),

    #[error("need at least {need} values, found {found}")]
    TooFewValues { need: usize, found: usize },

    #[error("no successful models in the estimate set")]
    NoEstimates,

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn malformed(file: impl Into<String>, line: u64, message: impl Into<String>) -> Self {
        Error::MalformedRow {
            file: file.into(),
            line,
            message: message.into(),
        }
    }

    pub fn schema(file: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            file: file.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable category used by the command line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                "missing_file"
            }
            Error::Io { .. } => "io",
            Error::MalformedRow { .. } | Error::Schema { .. } | Error::Serialization(_) => {
                "schema"
            }
            Error::Invalid(_) => "invalid_input",
            Error::ZeroReferenceFocal(_) | Error::UndefinedScore(_) => "undefined_score",
            Error::ZeroVariance
            | Error::RankDeficient(_)
            | Error::TooFewObservations { .. }
            | Error::TooFewClusters(_) => "estimation",
            Error::NonFactorial(_) | Error::TooFewValues { .. } | Error::NoEstimates => {
                "statistics"
            }
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        match err.into_kind() {
            csv::ErrorKind::Io(e) => Error::io("<csv>", e),
            other => Error::malformed("<csv>", line, format!("{other:?}")),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}
