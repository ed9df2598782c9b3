//! Centralized numerical tolerances.

use serde::{Deserialize, Serialize};

/// Maximum elementwise deviation from Hermiticity.
pub const TOL_HERM: f64 = 1e-12;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const TOL_PSD: f64 = -1e-10;
/// Largest truncation tail (norm or trace deficit) for measured states.
pub const TAIL_TOL: f64 = 1e-8;
/// Negativity below this is reported as zero.
pub const TOL_NEG: f64 = 1e-9;
/// Upper trace slack above one.
pub const TRACE_EXCESS: f64 = 1e-12;

/// Per-call overridable tolerance record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub herm: f64,
    pub psd: f64,
    pub tail: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: TOL_HERM,
            psd: TOL_PSD,
            tail: TAIL_TOL,
        }
    }
}

impl Tolerances {
    pub fn with_tail(tail: f64) -> Self {
        Self {
            tail,
            ..Self::default()
        }
    }
}
