//! Error type shared by all modules of the crate.

use std::path::PathBuf;

/// Crate-wide error enumeration.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature hit the maximum refinement depth before the
    /// requested relative tolerance was met. Carries the last estimate.
    #[error("quadrature did not converge{context}: last estimate {estimate:e}, requested rel. tol. {rel_tol:e}")]
    ToleranceNotMet {
        estimate: f64,
        rel_tol: f64,
        context: String,
    },

    /// The integrator produced a non-finite state component.
    #[error("state diverged (non-finite value) at step {step}")]
    Divergence { step: usize },

    /// Two vectors that must have equal lengths do not.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// An operation restricted to a specific spatial dimension was called
    /// with another one.
    #[error("unsupported dimension: got d={got}, operation requires d={expected}")]
    UnsupportedDimension { expected: usize, got: usize },

    /// Filesystem failure, with the offending path attached.
    #[error("{path}: {source}")]
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

pub type Result<T> = std::result::Result<T, Error>;
