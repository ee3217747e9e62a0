use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("design error: {0}")]
    Design(String),

    #[error("run index {index} out of range for a {rows}-run array")]
    RunOutOfRange { index: usize, rows: usize },

    #[error("malformed array: {0}")]
    MalformedArray(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("training error at step {step}: {reason}")]
    Training { step: u64, reason: String },

    #[error("schema error: column `{0}`")]
    Schema(String),

    #[error("parse error at row {row}, column `{column}`: {reason}")]
    Parse {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("validation error at row {row}: {violation}")]
    Validation { row: usize, violation: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid split: {0}")]
    Split(String),

    #[error("scaler error: {0}")]
    Scaler(String),

    #[error("mechanics error: {0}")]
    Mechanics(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("R² undefined: actual values are constant")]
    UndefinedR2,

    #[error("unsupported model format version {0}")]
    ModelVersion(u32),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
