//! Quantum-dot spin qubits coupled through a detuned cavity mode.
//!
//! The crate builds the dot–cavity Hamiltonians at several levels of
//! approximation, propagates them, and evaluates the conditional-phase gate
//! they implement.

pub mod error;
pub mod gates;
pub mod hamiltonians;
pub mod hilbert;
pub mod model;
pub mod propagation;

pub use error::{Error, Result};
pub use hilbert::{CMatrix, CVector, LevelBasis, Operator, Sign, SpaceDescriptor, StateVector, C64};
pub use model::{ModelParams, derive_couplings, DerivedCouplings};
