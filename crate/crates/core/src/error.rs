use thiserror::Error;

/// Errors reported by the filtering and gain-computation routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter violated its documented range (non-positive variance,
    /// empty ensemble, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Polynomial degree beyond the supported cap.
    #[error("degree {degree} exceeds the supported maximum {max}")]
    DegreeTooLarge { degree: usize, max: usize },

    /// Vector arguments that must agree in length did not.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// The density vanished where the computation needs to divide by it.
    #[error("density numerically zero at x = {x}")]
    SingularDensity { x: f64 },

    /// Two internal routes to the same quantity disagreed beyond tolerance;
    /// indicates a broken moment or recursion computation.
    #[error("internal consistency violation: {0}")]
    InternalConsistency(String),

    /// A particle became non-finite during filtering.
    #[error("filter diverged at step {step}")]
    Divergence { step: usize },

    /// An operation requiring a linear-Gaussian model was handed a
    /// nonlinear one.
    #[error("invalid model: {0}")]
    InvalidModel(String),
}
