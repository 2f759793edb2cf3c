//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, found {found_rows}x{found_cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        found_rows: usize,
        found_cols: usize,
    },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("singular value decomposition failed for a {rows}x{cols} matrix")]
    SvdFailure { rows: usize, cols: usize },

    #[error("rank {rank} out of range (must be in 1..={max})")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("matrix is rank deficient at requested rank: sigma_r = {sigma_r:.3e} vs sigma_1 = {sigma_1:.3e}")]
    DegenerateRank { sigma_1: f64, sigma_r: f64 },

    #[error("degenerate residual: bulk singular values are all zero (the iterate interpolates the observations exactly)")]
    DegenerateResidual,

    #[error("observation mask has no observed entries")]
    EmptyMask,

    #[error("invalid observation probability {0} (must lie in (0, 1])")]
    InvalidProbability(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}:{line}: duplicate entry ({i}, {j})")]
    DuplicateEntry {
        path: String,
        line: usize,
        i: usize,
        j: usize,
    },

    #[error("{path}:{line}: index ({i}, {j}) out of range for {rows}x{cols}")]
    IndexOutOfRange {
        path: String,
        line: usize,
        i: usize,
        j: usize,
        rows: usize,
        cols: usize,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
