use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty score set")]
    EmptyScores,

    #[error("invalid level: {0} (must lie strictly between 0 and 1)")]
    InvalidLevel(f64),

    #[error("split too small: {0}")]
    SplitTooSmall(String),

    #[error("singular design: feature matrix has rank {rank} < {cols}")]
    SingularDesign { rank: usize, cols: usize },

    #[error("underdetermined: {rows} rows for {cols} features")]
    Underdetermined { rows: usize, cols: usize },

    #[error("quantile fit did not converge after {iterations} iterations (duality gap {gap:e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("inverted interval: lo {lo} > hi {hi}")]
    InvertedInterval { lo: f64, hi: f64 },

    #[error("degenerate side: lengths must be positive (got {0})")]
    DegenerateSide(f64),

    #[error("correlation not positive definite")]
    NotPositiveDefinite,

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid scenario: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("replicate {replicate} (seed {seed}, stream {stream}) failed: {source}")]
    Replicate {
        replicate: usize,
        seed: u64,
        stream: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
