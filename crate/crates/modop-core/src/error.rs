//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by algebra, module, kernel, and harness operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Two operands live over different algebra shapes or module ranks.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An algebra shape or operator layout failed validation.
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    /// A matrix expected to be Hermitian was not, beyond tolerance.
    #[error("matrix is not Hermitian: deviation {residual:.3e} exceeds {tol:.3e}")]
    NotHermitian { residual: f64, tol: f64 },

    /// A matrix expected to be positive semidefinite has a genuinely
    /// negative eigenvalue.
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:.3e} below -{tol:.3e}")]
    NotPositive { eigenvalue: f64, tol: f64 },

    /// An inverse power of a PSD matrix hit an eigenvalue too close to zero.
    #[error(
        "matrix is numerically singular: eigenvalue {eigenvalue:.3e} below cutoff {cutoff:.3e}"
    )]
    SingularMatrix { eigenvalue: f64, cutoff: f64 },

    /// The Jacobi iteration did not converge within the sweep cap.
    #[error("iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    /// A complex matrix handed to `unembed` carries mass outside the
    /// block-diagonal structure of M_k(A).
    #[error(
        "embedded matrix violates block structure: off-structure mass {mass:.3e} exceeds {tol:.3e}"
    )]
    StructureViolation { mass: f64, tol: f64 },

    /// A verifier's hypothesis does not hold for the given operands.
    #[error("precondition '{check}' failed: residual {residual:.3e} exceeds {tol:.3e}")]
    PreconditionFailed {
        check: String,
        residual: f64,
        tol: f64,
    },

    /// A bounded transform is too close to the unit sphere to invert.
    #[error("bounded transform not invertible: margin {margin:.3e} below {required:.3e}")]
    TransformSingular { margin: f64, required: f64 },

    /// A suite configuration is unusable.
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
