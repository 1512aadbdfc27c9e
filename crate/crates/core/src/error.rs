use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix data has {len} entries, expected {n}x{n}")]
    Shape { n: usize, len: usize },
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("window [{start}, {start}+{len}) exceeds sequence of length {available}")]
    Window { start: usize, len: usize, available: usize },
    #[error("sigma {value} for agent {agent} is outside (0, 1]")]
    Sigma { agent: usize, value: f64 },
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("invalid channel coefficient {value} on arc ({from}, {to})")]
    Coefficient { from: usize, to: usize, value: f64 },
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("non-finite state for agent {agent} at instant {instant}")]
    NonFinite { agent: usize, instant: usize },
}

impl Error {
    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        Error::Config { key: key.into(), reason: reason.into() }
    }
}
