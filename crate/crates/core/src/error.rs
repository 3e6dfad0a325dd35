use thiserror::Error;

/// Errors raised by the simulator, the Monte Carlo engine and the compiler.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Usage(String),

    #[error("row {row} out of range (sub-array has {rows} rows)")]
    RowOutOfRange { row: usize, rows: usize },

    #[error("expected {expected} bits for a row write, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("logic output row {row} is also an input row")]
    InPlaceLogic { row: usize },

    #[error("operation issued at {t_now} ns but the sub-array is busy until {busy_until} ns")]
    Overlap { t_now: u64, busy_until: u64 },

    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("undeclared variable `{name}` at {line}:{col}")]
    Undeclared { name: String, line: usize, col: usize },

    #[error("no statements")]
    Empty,

    #[error("row capacity exceeded: {live} values live before node {node}, {available} rows available (live: {cut})")]
    Capacity {
        live: usize,
        available: usize,
        node: usize,
        cut: String,
    },

    #[error("calibration failed: {msg}")]
    Calibration { msg: String, trace: Vec<String> },

    #[error("program invariant violated: {0}")]
    Program(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
