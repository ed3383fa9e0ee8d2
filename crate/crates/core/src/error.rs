use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a mathematical precondition (bad spins, negative λ, mismatched sizes).
    #[error("domain error: {0}")]
    Domain(String),

    /// Exact enumeration was requested for a model that is too large.
    #[error("capacity error: {what} requires p <= {max}, got p = {p}")]
    Capacity {
        what: &'static str,
        p: usize,
        max: usize,
    },

    /// Random graph rejection sampling ran out of attempts.
    #[error("generation error: no graph with max degree {d} found in {attempts} attempts (p = {p})")]
    Generation { p: usize, d: usize, attempts: usize },

    /// The requested computation is not defined for the given distribution spec.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// `Q_SS` could not be inverted.
    #[error("singular Q_SS (condition estimate {condition:e})")]
    Singular { condition: f64 },

    /// Root bracketing failed: the function has the same sign at both ends.
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    /// Malformed input file.
    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
