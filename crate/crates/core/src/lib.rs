//! Exact non-Markovian quantum-state diffusion for one or two qubits that are
//! read out through a single-mode cavity, which in turn leaks into a detector
//! environment with Ornstein-Uhlenbeck memory.
//!
//! Conventions used throughout the crate:
//!
//! * a qubit basis state `|q⟩` has index `q`, with `q = 0` the ground state;
//!   `σ_z|1⟩ = +|1⟩` and `σ₋ = |0⟩⟨1|`;
//! * two-qubit states `|q_A q_B⟩` have index `2·q_A + q_B`;
//! * composite spaces are ordered system ⊗ cavity (⊗ auxiliary mode);
//! * frequencies are in units of the qubit frequency scale and times in its
//!   inverse.
//!
//! The pipeline is: [`coeffs`] solves the deterministic O-operator
//! coefficients, [`noise`] samples the two Gaussian noises, [`trajectory`]
//! integrates one linear QSD trajectory, [`ensemble`] averages projectors into
//! density matrices, and [`observables`] extracts populations and concurrence.
//! [`reference`] holds deterministic oracles, and [`config`], [`scenario`],
//! [`export`] and [`validation`] back the command-line runner.

pub mod coeffs;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod export;
pub mod grid;
pub mod noise;
pub mod observables;
pub mod operators;
pub mod reference;
pub mod scenario;
pub mod trajectory;
pub mod validation;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use num_complex::Complex64 as C64;

/// Numerical tolerances and limits shared by several modules.
pub mod tol {
    /// Hermiticity defect accepted for averaged density matrices.
    pub const HERMITIAN: f64 = 1e-12;
    /// Defect accepted before a matrix handed to the concurrence is rejected.
    pub const HERMITIAN_INPUT: f64 = 1e-8;
    /// Norm tolerance for initial states.
    pub const NORMALIZATION: f64 = 1e-10;
    /// Grid consistency tolerance, relative to `max(1, t_max)`.
    pub const GRID: f64 = 1e-12;
    /// Trajectories whose norm exceeds this are rejected.
    pub const OVERFLOW_NORM: f64 = 1e6;
    /// Largest tolerated fraction of rejected trajectories.
    pub const REJECT_FRACTION: f64 = 1e-3;
    /// `|N|` ceiling that signals the Riccati pole.
    pub const POLE_CEILING: f64 = 1e6;
    /// Largest `rate·dt` the OU sampler accepts.
    pub const MAX_RATE_STEP: f64 = 10.0;
    /// Default byte cap for retained multi-time coefficient slices.
    pub const SLICE_MEMORY_CAP: usize = 512 << 20;
    /// Fock-cutoff convergence threshold on qubit observables.
    pub const CUTOFF_CONVERGENCE: f64 = 1e-4;
}
