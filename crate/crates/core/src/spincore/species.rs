//! Donor-constants file: species label → {I, A, g, gₙ, Q}.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::operators::Spin;
use super::system::{quadrupole_from_principal, SpinSystem};
use crate::error::{Error, Result};
use crate::linalg::Real3;

pub const BUILTIN_DONORS: &str = include_str!("../../data/donors.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesEntry {
    pub nuclear_spin: f64,
    pub hyperfine_mhz: f64,
    pub g: f64,
    pub nuclear_g: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrupole_p_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrupole_eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrupole_tensor_mhz: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperfine_tensor_mhz: Option<[[f64; 3]; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesTable {
    pub species: BTreeMap<String, SpeciesEntry>,
}

fn rows(m: &[[f64; 3]; 3]) -> Real3 {
    Real3::from_fn(|i, j| m[i][j])
}

impl SpeciesEntry {
    pub fn to_system(&self, label: &str) -> Result<SpinSystem> {
        let spin = Spin::new(self.nuclear_spin)?;
        let mut sys = SpinSystem::isotropic(label, spin, self.g, self.hyperfine_mhz, self.nuclear_g);
        if let Some(a) = &self.hyperfine_tensor_mhz {
            sys.hyperfine_tensor = rows(a);
        }
        sys.quadrupole_tensor = match (&self.quadrupole_tensor_mhz, self.quadrupole_p_mhz) {
            (Some(_), Some(_)) => {
                return Err(Error::Parse(format!(
                    "species {label}: give either quadrupole_tensor_mhz or quadrupole_p_mhz, not both"
                )))
            }
            (Some(q), None) => rows(q),
            (None, Some(p)) => quadrupole_from_principal(p, self.quadrupole_eta.unwrap_or(0.0)),
            (None, None) => Real3::zeros(),
        };
        sys.validate()?;
        Ok(sys)
    }
}

impl SpeciesTable {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("donor constants: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_DONORS).expect("built-in donor table parses")
    }

    pub fn system(&self, label: &str) -> Result<SpinSystem> {
        self.species
            .get(label)
            .ok_or_else(|| Error::NotFound(format!("species {label}")))?
            .to_system(label)
    }
}

/// One of the shipped species (P, As, Bi).
pub fn builtin(label: &str) -> Result<SpinSystem> {
    SpeciesTable::builtin().system(label)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_species() {
        let p = builtin("P").unwrap();
        assert_eq!(p.nuclear_spin, Spin::HALF);
        assert_eq!(p.dim(), 4);
        let bi = builtin("Bi").unwrap();
        assert_eq!(bi.dim(), 20);
        assert!(builtin("Sb").is_err());
    }

    #[test]
    fn missing_quadrupole_is_zero() {
        let t = SpeciesTable::parse(
            "[species.X]\nnuclear_spin = 1.5\nhyperfine_mhz = 10.0\ng = 2.0\nnuclear_g = 1.0\n",
        )
        .unwrap();
        assert_eq!(t.system("X").unwrap().quadrupole_tensor, Real3::zeros());
    }

    #[test]
    fn principal_quadrupole_is_traceless() {
        let t = SpeciesTable::parse(
            "[species.X]\nnuclear_spin = 1.5\nhyperfine_mhz = 10.0\ng = 2.0\nnuclear_g = 1.0\nquadrupole_p_mhz = 0.02\nquadrupole_eta = 0.4\n",
        )
        .unwrap();
        let q = t.system("X").unwrap().quadrupole_tensor;
        assert!(q.trace().abs() < 1e-15);
        assert!((q[(2, 2)] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(SpeciesTable::parse("[species.X]\nnuclear_spin = 0.5\nhyperfine_mhz = 1.0\ng = 2.0\nnuclear_g = 1.0\nfoo = 1\n").is_err());
    }
}
