//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input contained a header but no data rows, or a table set was empty.
    #[error("empty table set")]
    EmptyTableSet,

    /// A data row failed to parse or violated a count invariant.
    /// Row numbers count data rows starting at 1 (the header is row 0).
    #[error("{reason} at row {row}")]
    InvalidRow { row: usize, reason: String },

    /// Two rows carried the same trial label.
    #[error("duplicate label '{label}' at row {row}")]
    DuplicateLabel { row: usize, label: String },

    /// Pearson correlation requested on fewer than two tables.
    #[error("correlation needs at least 2 tables, got {0}")]
    TooFewTables(usize),

    /// Zero variance in one arm's observed rates.
    #[error("correlation undefined")]
    CorrelationUndefined,

    /// A model parameter or configuration value was out of range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The posterior kernel evaluated to NaN or infinity on the quadrature
    /// grid, which signals corrupted parameters upstream.
    #[error("non-finite posterior kernel value at delta = {delta}")]
    NonFiniteKernel { delta: f64 },

    /// Test statistic undefined because the standard error is zero.
    #[error("standard error is zero, test statistic undefined")]
    ZeroStandardError,

    /// pool_fits called with misaligned inputs.
    #[error("fit list length {fits} does not match table count {tables}")]
    LengthMismatch { fits: usize, tables: usize },

    /// Every replication of a correlation study produced degenerate rates.
    #[error("all replications degenerate: no correlation defined")]
    AllReplicationsDegenerate,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
