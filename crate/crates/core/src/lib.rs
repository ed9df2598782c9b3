//! Truncated Fock-space simulation of phase-randomized optical states.
//!
//! The crate builds coherent, two-mode squeezed and shared-phase multi-copy
//! states on a truncated number basis, evaluates decomposition-independent
//! diagnostics (partial transpose negativity, product-diagonal separability
//! certificates, measurement statistics), and Monte Carlo samples a
//! displaced-parity CHSH protocol whose phase is random per experiment.
//!
//! Layout conventions shared by every module:
//!
//! * a multimode basis index is row-major over modes in declared order, so
//!   for dims `[d0, d1]` the state `|n0 n1⟩` sits at `n0 * d1 + n1`;
//! * kets are never renormalized after truncation, the missing weight is
//!   reported by [`fock::Ket::norm_deficit`];
//! * all tolerances live in [`tol::Tolerances`].

pub mod bell;
pub mod entanglement;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod par;
pub mod protocol;
pub mod qubit_demo;
pub mod states;
pub mod tol;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Dense complex matrix used for operators.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex vector used for kets.
pub type CVector = nalgebra::DVector<C64>;
