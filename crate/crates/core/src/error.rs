use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Condition number above the inversion threshold (or exactly singular).
    #[error("matrix is singular or ill-conditioned (condition number {cond:e})")]
    Singular { cond: f64 },

    #[error("matrix dimension mismatch: {0}")]
    Dimension(String),

    /// Generated schedules need `n` to be a positive multiple of `K`.
    #[error("schedule length {n} is not a positive multiple of {k}")]
    BadLength { n: usize, k: usize },

    #[error("schedule parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schedule is empty")]
    EmptySchedule,

    /// At least two distinct SNR abscissae are needed to fit a slope.
    #[error("degenerate SNR grid: {0}")]
    DegenerateGrid(String),

    #[error("polytope is infeasible")]
    Infeasible,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Some user's perfect-CSIT fraction exceeds the cap `lambda` of the
    /// per-user fraction constraint.
    #[error(
        "schedule audit failed: user {user} has perfect-CSIT fraction {fraction:.6} > cap {cap:.6}"
    )]
    AuditFailure {
        user: usize,
        fraction: f64,
        cap: f64,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
