use super::operators::SpinOperators;
use super::system::{SpinSystem, StaticField};
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::linalg::{bilinear, hermiticity_error, linear, CMat};

/// The four contributions to H/h, each in MHz.
#[derive(Debug, Clone)]
pub struct HamiltonianTerms {
    pub electron_zeeman: CMat,
    pub hyperfine: CMat,
    pub nuclear_zeeman: CMat,
    pub quadrupole: CMat,
}

impl HamiltonianTerms {
    pub fn total(&self) -> CMat {
        &self.electron_zeeman + &self.hyperfine + &self.nuclear_zeeman + &self.quadrupole
    }
}

pub fn hamiltonian_terms(
    sys: &SpinSystem,
    field: &StaticField,
    consts: &PhysicalConstants,
) -> Result<HamiltonianTerms> {
    sys.validate()?;
    let ops = SpinOperators::new(sys.nuclear_spin);
    let b = field.vector();
    // β B₀·ĝ·S: the effective field acting on S is ĝᵀB₀ (ĝ symmetric).
    let electron_field = sys.g_tensor.transpose() * b * consts.bohr_mhz_per_t();
    let nuclear_field = b * (-consts.nuclear_magneton_over_h * sys.nuclear_g);
    Ok(HamiltonianTerms {
        electron_zeeman: linear(&electron_field, &ops.s),
        hyperfine: bilinear(&ops.s, &sys.hyperfine_tensor, &ops.i),
        nuclear_zeeman: linear(&nuclear_field, &ops.i),
        quadrupole: bilinear(&ops.i, &sys.quadrupole_tensor, &ops.i),
    })
}

/// H/h = β B₀·ĝ·S + S·Â·I − βₙ gₙ B₀·I + I·Q̂·I, in MHz.
pub fn build_hamiltonian(sys: &SpinSystem, field: &StaticField) -> Result<CMat> {
    build_hamiltonian_with(sys, field, &PhysicalConstants::default())
}

pub fn build_hamiltonian_with(
    sys: &SpinSystem,
    field: &StaticField,
    consts: &PhysicalConstants,
) -> Result<CMat> {
    let h = hamiltonian_terms(sys, field, consts)?.total();
    let err = hermiticity_error(&h);
    if err > 1e-10 {
        return Err(Error::Numerical(format!("Hamiltonian not Hermitian (relative error {err:.3e})")));
    }
    Ok(h)
}
