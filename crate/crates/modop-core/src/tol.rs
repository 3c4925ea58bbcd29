//! Global tolerance policy.
//!
//! Every module reads its thresholds from here so that kernel, decomposition,
//! and verifier never disagree about what counts as zero.

use serde::{Deserialize, Serialize};

pub const MACHINE_EPS: f64 = f64::EPSILON;

/// Safety factor in the numerical-rank cutoff.
pub const RANK_SAFETY: f64 = 100.0;

/// Margin required of I − F*F before a bounded transform may be inverted.
pub const EPS_MARGIN: f64 = 1e-8;

/// Singular-value cutoff: dim · eps · scale · safety.
pub fn rank_cutoff(dim: usize, scale: f64) -> f64 {
    dim as f64 * MACHINE_EPS * scale * RANK_SAFETY
}

/// Reconstruction tolerance for kernel factorizations: 1e-12 · (1 + scale).
pub fn fun_tol(scale: f64) -> f64 {
    1e-12 * (1.0 + scale)
}

/// Negative-eigenvalue allowance for PSD inputs: 1e-10 · (1 + scale).
pub fn psd_tol(scale: f64) -> f64 {
    1e-10 * (1.0 + scale)
}

/// Off-structure allowance when reading a complex matrix back into M_k(A).
pub fn embed_tol(scale: f64) -> f64 {
    1e-12 * (1.0 + scale)
}

/// Hermiticity gate before symmetrizing: generous, callers construct
/// Hermitian inputs explicitly.
pub fn herm_tol(scale: f64) -> f64 {
    1e-8 * (1.0 + scale)
}

/// Verdict thresholds for the theorem verifiers. Residuals are stored
/// normalized (each check divides by its stated scale), so these compare
/// directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Polar conditions, normality, commutation, Fuglede-Putnam, Kaplansky.
    pub property: f64,
    /// Unitarity of constructed witnesses and adjoint transfer of the
    /// bounded transform.
    pub strict: f64,
    /// Regular-operator witness residuals (amplified by Q_t inversion).
    pub regular: f64,
    /// Bounded-transform roundtrip, cubic in (1 + ‖t‖).
    pub roundtrip: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            property: 1e-9,
            strict: 1e-10,
            regular: 1e-8,
            roundtrip: 1e-6,
        }
    }
}

impl Tolerances {
    /// Rescales the whole policy around a new base property tolerance,
    /// keeping the default ratios.
    pub fn with_base(base: f64) -> Self {
        Self {
            property: base,
            strict: base / 10.0,
            regular: base * 10.0,
            roundtrip: base * 1000.0,
        }
    }

    /// Band around `property` treated as numerically undecidable.
    pub fn indeterminate_band(&self) -> (f64, f64) {
        (self.property / 10.0, self.property * 10.0)
    }
}
