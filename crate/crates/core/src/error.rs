use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("schema error: {0}")]
    Schema(String),

    /// `row` is the 1-based line number in the source file (the header is line 1).
    #[error("data error at row {row}{}: {msg}", column.as_ref().map(|c| format!(", column '{c}'")).unwrap_or_default())]
    Data {
        row: usize,
        column: Option<String>,
        msg: String,
    },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("numeric failure in {stage} at epoch {epoch}, batch {batch}: loss is {loss}")]
    Numeric {
        stage: &'static str,
        epoch: usize,
        batch: usize,
        loss: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("integrity error in block '{block}': {msg}")]
    Integrity { block: String, msg: String },

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numeric failure, 1 internal.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) => 2,
            Error::Numeric { .. } => 4,
            Error::Shape { .. } | Error::Internal(_) => 1,
            _ => 3,
        }
    }
}
