use crate::constants::PhysicalConstants;
use crate::error::{invalid, Result};
use crate::linalg::{c, eigh, hermiticity_error, CMat};
use crate::spincore::LevelSet;

/// A density matrix in the |mS⟩⊗|mI⟩ product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub rho: CMat,
}

impl DensityState {
    pub fn new(rho: CMat) -> Result<Self> {
        let s = DensityState { rho };
        s.check(1e-9)?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// Trace, Hermiticity and positivity checks at tolerance `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        if (self.rho.trace().re - 1.0).abs() > tol || self.rho.trace().im.abs() > tol {
            return invalid(format!("density matrix trace {} differs from 1", self.rho.trace()));
        }
        if hermiticity_error(&self.rho) > tol {
            return invalid("density matrix is not Hermitian");
        }
        let (vals, _) = eigh(&self.rho)?;
        if vals[0] < -tol {
            return invalid(format!("density matrix has negative eigenvalue {:.3e}", vals[0]));
        }
        Ok(())
    }

    /// Level populations in the eigenbasis of `levels`.
    pub fn populations(&self, levels: &LevelSet) -> Vec<f64> {
        let r = levels.to_eigenbasis(&self.rho);
        (0..r.nrows()).map(|k| r[(k, k)].re).collect()
    }

    pub fn in_eigenbasis(&self, levels: &LevelSet) -> CMat {
        levels.to_eigenbasis(&self.rho)
    }
}

/// Boltzmann populations exp(−hE/kT)/Z for energies in MHz.
pub fn boltzmann_populations(energies: &[f64], temperature: f64) -> Vec<f64> {
    let k = PhysicalConstants::default();
    let beta = k.planck * 1e6 / (k.boltzmann * temperature);
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-(e - e0) * beta).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Thermal equilibrium ρ = exp(−hH/k_BT)/Z for H in MHz.
pub fn thermal_state(levels: &LevelSet, temperature: f64) -> Result<DensityState> {
    if !(temperature > 0.0) {
        return invalid("temperature must be positive");
    }
    let pops = boltzmann_populations(&levels.energies, temperature);
    let n = levels.dim();
    let mut d = CMat::zeros(n, n);
    for (k, p) in pops.iter().enumerate() {
        d[(k, k)] = c(*p);
    }
    Ok(DensityState { rho: levels.from_eigenbasis(&d) })
}
