use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid curve lengths: {0}")]
    InvalidLengths(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The 4x4 multiplier system is (numerically) singular. This happens when
    /// two or more curves are flat at the same time.
    #[error("singular multiplier system (condition estimate {cond:.3e})")]
    SingularSystem { cond: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("projection onto the constraint set failed after {iterations} iterations (defect {defect:.3e})")]
    ProjectionFailed { iterations: usize, defect: f64 },

    #[error("inner minimization failed: {0}")]
    InnerSolveFailed(String),

    /// Two curves lost their oscillation while the strict length condition
    /// does not hold; the multipliers can no longer be controlled.
    #[error("flatness blow-up at step {step}: oscillations {oscs:?}")]
    FlatnessBlowup { step: usize, oscs: [f64; 3] },

    #[error("state is not admissible (constraint defect {defect:.3e})")]
    Inadmissible { defect: f64 },

    #[error("a-priori estimate violated at step {step}: {what}")]
    EstimateViolated { step: usize, what: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether this error signals loss of control over the multipliers during
    /// an evolution, as opposed to bad input or a solver failure.
    pub fn is_blowup(&self) -> bool {
        matches!(self, Error::FlatnessBlowup { .. } | Error::SingularSystem { .. })
    }
}
