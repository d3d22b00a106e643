//! Error type shared across the crate, with the CLI exit-code mapping.

use std::fmt;

/// Crate-wide error enum. Variants map onto CLI exit codes via
/// [`Error::exit_code`].
#[derive(Debug)]
pub enum Error {
    /// Invalid configuration (bad key, unresolvable parameter, bad value).
    Config(String),
    /// API misuse: index out of range, dimension mismatch, unmet precondition.
    Usage(String),
    /// Graph/mixing-matrix construction or validation failure.
    Topology(String),
    /// Numerical failure: non-finite input, solver non-convergence.
    Numeric(String),
    /// A simulation produced a non-finite iterate.
    Diverged {
        alpha: f64,
        outer: usize,
        inner: usize,
    },
    Io(std::io::Error),
    /// Violated internal invariant ("should be impossible" paths).
    Internal(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Usage(msg) => write!(f, "usage error: {msg}"),
            Error::Topology(msg) => write!(f, "topology error: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
            Error::Diverged {
                alpha,
                outer,
                inner,
            } => write!(
                f,
                "diverged: non-finite iterate at outer loop {outer}, inner step {inner} \
                 with step size {alpha:e}"
            ),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl Error {
    /// Process exit code for the CLI: 2 config/usage, 3 divergence, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) | Error::Topology(_) => 2,
            Error::Diverged { .. } => 3,
            Error::Numeric(_) => 4,
            Error::Io(_) | Error::Internal(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
