//! Simulation of one-mode open quantum systems with quadratic Hamiltonians
//! and a single linear Lindblad coupling.
//!
//! The dynamics is computed along three exact routes that can be
//! cross-validated against each other and against a dense truncated-Fock
//! brute force:
//!
//! * Lindblad dynamics of the Gaussian parameters (centre and width matrix),
//! * stochastic-Schrodinger (SSE) trajectories of the same parameters,
//! * quantum-jump trajectories expanded in a moving Hagedorn basis driven by
//!   the complexified linearised flow of the effective non-Hermitian
//!   Hamiltonian.

pub mod cli;
pub mod cmatrix;
pub mod dynamics;
pub mod ensemble;
pub mod flow;
pub mod gaussian;
pub mod hagedorn;
pub mod jump;
pub mod model;
pub mod oracle;
pub mod phase;
pub mod scalar;
pub mod validate;

pub use num_complex::Complex64 as C64;

/// Real phase-space vector at the engine scalar type.
pub type RVec2 = phase::PhasePoint<f64>;
/// Complex frame vector at the engine scalar type.
pub type CVec2 = phase::ComplexVec2<f64>;
/// Real 2x2 matrix at the engine scalar type.
pub type RMat2 = phase::Mat2<f64>;
/// Complex 2x2 matrix at the engine scalar type.
pub type CMat2 = phase::Mat2<C64>;
