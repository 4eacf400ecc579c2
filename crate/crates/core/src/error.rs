use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Row has the wrong number of fields. `row` is 1-based, counting data rows only.
    #[error("row {row}: expected {expected} fields, found {found}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },

    /// Unparseable token. `row` is 1-based over data rows, `col` is 0-based.
    #[error("row {row}, column {col} ({name}): cannot parse {token:?} as a number")]
    BadNumber {
        row: usize,
        col: usize,
        name: String,
        token: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("column index {index} out of range for {n_cols} columns")]
    ColumnIndex { index: usize, n_cols: usize },

    #[error("column has fewer than two distinct values")]
    DegenerateColumn,

    #[error("bin index {index} out of range for {n_bins} bins")]
    BinIndex { index: usize, n_bins: usize },

    #[error("feature {0} has no observed values")]
    NoObservedValues(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("not a model file (bad magic bytes)")]
    BadMagic,

    #[error("unsupported model format version {found} (this build reads version {supported})")]
    Version { found: u16, supported: u16 },

    #[error("model file truncated")]
    Truncated,

    #[error("model checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },

    #[error("malformed model file: {0}")]
    Malformed(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
