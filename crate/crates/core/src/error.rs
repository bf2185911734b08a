use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left_rows}x{left_cols} cannot combine with {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid shape {rows}x{cols}: {reason}")]
    Shape {
        rows: usize,
        cols: usize,
        reason: &'static str,
    },

    #[error(
        "enumerating {bits}-bit matrices exceeds the budget of {budget} bits; \
         supply a stronger filter or raise the budget (--budget)"
    )]
    BudgetExceeded { bits: u32, budget: u32 },

    #[error("unsupported modulation order m = {0} (square QAM with m in {{2, 4}} only)")]
    UnsupportedOrder(u32),

    #[error("unknown modulation `{0}` (expected qam4 or qam16)")]
    UnknownModulation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("atlas error: {0}")]
    Atlas(String),

    #[error("atlas checksum mismatch: stored {stored}, computed {computed}")]
    Checksum { stored: String, computed: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
