//! Exact dynamics and optimal control of a single qubit coupled to a small
//! spin environment.
//!
//! The composite system is one controlled spin-1/2 (the qubit, particle 0)
//! and `n <= 6` uncontrolled spins interacting through isotropic Heisenberg
//! exchange. Everything here works on dense `2^(n+1)`-dimensional complex
//! matrices and propagates the full unitary exactly, one piecewise-constant
//! control step at a time.
//!
//! Module map:
//!
//! - [`hilbert`]: tensor-product operator algebra and dense matrix helpers.
//! - [`model`]: system parameters, Hamiltonian assembly, controllability.
//! - [`dynamics`]: unitary and costate propagation on a time grid.
//! - [`measures`]: environment-minimized gate distance, fidelity, entropy.
//! - [`optim`]: genetic and adjoint-gradient pulse optimization.
//! - [`robustness`]: Monte Carlo ensembles over random coupling strengths.
//!
//! The crate is `no_std` (it needs `alloc`). Work that can be spread over
//! threads is routed through the [`Executor`] trait so that a host crate can
//! plug in a thread pool without changing results.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

mod error;
mod exec;

pub mod dynamics;
pub mod hilbert;
pub mod measures;
pub mod model;
pub mod optim;
pub mod robustness;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};

pub use dynamics::{PiecewiseField, TimeGrid, UnitaryTrajectory};
pub use hilbert::{ComplexMatrix, StateVector};
pub use measures::{DistanceResult, GateTarget};
pub use model::{CouplingRule, SystemSpec};
