//! Physical constants in the frequency units used throughout the crate.

use serde::{Deserialize, Serialize};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum permeability (T·m/A).
pub const MU_0: f64 = 1.256_637_062_12e-6;

/// Magneton and thermal constants. Magnetons are stored divided by Planck's
/// constant so Hamiltonians come out directly in frequency units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Bohr magneton over h (GHz/T).
    pub bohr_magneton_over_h: f64,
    /// Nuclear magneton over h (MHz/T).
    pub nuclear_magneton_over_h: f64,
    /// Planck constant (J·s).
    pub planck: f64,
    /// Boltzmann constant (J/K).
    pub boltzmann: f64,
}

impl PhysicalConstants {
    /// CODATA 2018 values.
    pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
        bohr_magneton_over_h: 13.996_244_936_1,
        nuclear_magneton_over_h: 7.622_593_229,
        planck: 6.626_070_15e-34,
        boltzmann: 1.380_649e-23,
    };

    /// Bohr magneton over h in MHz/T, the unit the Hamiltonian is assembled in.
    pub fn bohr_mhz_per_t(&self) -> f64 {
        self.bohr_magneton_over_h * 1e3
    }

    /// Proton-to-electron mass ratio implied by the two magnetons.
    pub fn magneton_ratio(&self) -> f64 {
        self.bohr_mhz_per_t() / self.nuclear_magneton_over_h
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA_2018
    }
}
