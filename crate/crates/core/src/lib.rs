//! Simulation of electrically driven nuclear magnetic resonance of group-V
//! donors in silicon.
//!
//! * [`spincore`]: spin Hamiltonian, levels and transitions.
//! * [`starkdrive`]: electric-field modulation of the g, A and Q tensors.
//! * [`dynamics`]: density-matrix pulse sequences (Davies ENDOR, Rabi maps).
//! * [`ensemble`]: coplanar-waveguide field maps, implant profiles, averaging.
//! * [`pbgnet`]: transfer-matrix model of the photonic bandgap resonator.

pub mod constants;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod pbgnet;
pub mod spincore;
pub mod starkdrive;

pub use error::{Error, Result};
