use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("inner dimension {k} exceeds the supported maximum {max}")]
    InnerDimTooLarge { k: usize, max: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("voltage {voltage} V outside the supported span [{min}, {max}] V")]
    VoltageOutOfRange { voltage: f64, min: f64, max: f64 },

    #[error("cannot inject {freq} errors into {slots} positions")]
    FreqTooLarge { freq: usize, slots: usize },

    #[error("matrix {m}x{k}x{n} does not fit a {rows}x{cols} array and tiling is disabled")]
    ArrayOverflow {
        m: usize,
        k: usize,
        n: usize,
        rows: usize,
        cols: usize,
    },

    #[error("quality grid has no acceptable/unacceptable boundary: {0}")]
    NoBoundary(String),

    #[error("oracle failed: {0}")]
    Oracle(String),

    #[error("oracle failed at freq={freq}, mag_log2={mag_log2}: {source}")]
    OracleCell {
        freq: usize,
        mag_log2: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
