//! Numerical tolerances shared across the engine.

use serde::{Deserialize, Serialize};

/// Absolute tolerance for structural checks (normalization, hermiticity, trace).
pub const STRUCTURAL: f64 = 1e-12;
/// Relative tolerance for derived physical quantities.
pub const DERIVED: f64 = 1e-9;
/// Relative margin a strict inequality must clear before a test fires.
pub const VERDICT: f64 = 1e-9;
/// Smallest eigenvalue accepted for a density matrix.
pub const PSD: f64 = 1e-10;
/// Largest imaginary residue tolerated on a Hermitian expectation value.
pub const IMAG_RESIDUE: f64 = 1e-10;
/// Discarded probability mass a truncated constructor accepts by default.
pub const TRUNCATION_MASS: f64 = 1e-10;
/// Entries below this magnitude are omitted from serialized states.
pub const SERIALIZE_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub structural: f64,
    pub derived: f64,
    pub verdict: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { structural: STRUCTURAL, derived: DERIVED, verdict: VERDICT }
    }
}

/// `|a - b| <= rel * max(|a|, |b|, floor)`.
pub fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(floor)
}
