//! Donor spin Hamiltonian: construction, exact diagonalization and
//! transition bookkeeping.

mod hamiltonian;
mod levels;
mod operators;
pub mod species;
mod system;
mod transitions;

pub use hamiltonian::{build_hamiltonian, build_hamiltonian_with, hamiltonian_terms, HamiltonianTerms};
pub use levels::{eigensystem, LevelLabel, LevelSet};
pub use operators::{spin_matrices, Spin, SpinOperators};
pub use system::{quadrupole_from_principal, SpinSystem, StaticField};
pub use transitions::{esr_field_positions, transition_table, FieldPosition, Probe, Transition, TransitionClass};

/// Levels of `sys` at `field`.
pub fn levels(sys: &SpinSystem, field: &StaticField) -> crate::Result<LevelSet> {
    eigensystem(&build_hamiltonian(sys, field)?)
}
