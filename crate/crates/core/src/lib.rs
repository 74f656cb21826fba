//! Two exchange-coupled spin qubits driven through avoided crossings.
//!
//! The Hamiltonian conserves `σ₁ᶻσ₂ᶻ`, so the four-dimensional problem splits
//! into two independent two-level problems. This crate builds those blocks,
//! propagates them numerically, evaluates the closed-form finite-window
//! amplitudes, and layers entanglement, parameter estimation and open-system
//! extensions on top.

pub mod error;
pub mod estimation;
pub mod model;
pub mod observables;
pub mod openquantum;
pub mod ode;
pub mod propagation;
pub mod specfun;

pub use error::{Error, Result};
pub use model::{
    BasisState, BlockDecay, CouplingTensor, DecayRates, EffectiveBlock, FieldProtocol,
    FieldTarget, Sector, TabulatedField,
};
pub use propagation::{BlockPropagator, StateTrajectory, TwoQubitState, Window};
