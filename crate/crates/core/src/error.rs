use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the model builders and solvers.
///
/// `name()` gives a stable identifier used in machine-readable error records.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidSpec { field: &'static str, reason: String },

    #[error("no edge-state solution: j1/j2 = {ratio} must be below N/(N+1) = {limit}")]
    NoEdgeSolution { ratio: f64, limit: f64 },

    #[error("expected {expected} near-zero eigenvalues inside the edge window, found {found}")]
    ZeroManifoldAmbiguous { expected: usize, found: usize },

    #[error("edge manifold is not separated from the bulk (gap = {gap})")]
    ManifoldLeakage { gap: f64 },

    #[error("calibration reached fidelity {fidelity:.6} (< {required}) after {evaluations} evaluations")]
    CalibrationFailed {
        fidelity: f64,
        required: f64,
        evaluations: usize,
    },

    #[error("integrator stalled at t = {time}: step {dt} below floor")]
    IntegratorStall { time: f64, dt: f64 },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry})")]
    NotHermitian { asymmetry: f64 },

    #[error("dissipation kernel is not positive semidefinite (min eigenvalue {min_eigenvalue})")]
    NonPsdKernel { min_eigenvalue: f64 },

    #[error("{0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidSpec { .. } => "InvalidSpec",
            Error::NoEdgeSolution { .. } => "NoEdgeSolution",
            Error::ZeroManifoldAmbiguous { .. } => "ZeroManifoldAmbiguous",
            Error::ManifoldLeakage { .. } => "ManifoldLeakage",
            Error::CalibrationFailed { .. } => "CalibrationFailed",
            Error::IntegratorStall { .. } => "IntegratorStall",
            Error::NotHermitian { .. } => "NotHermitian",
            Error::NonPsdKernel { .. } => "NonPsdKernel",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }

    /// True for errors caused by bad input rather than by a numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec { .. } | Error::InvalidArgument(_) | Error::NotHermitian { .. }
        )
    }

    pub(crate) fn spec(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field,
            reason: reason.into(),
        }
    }
}
