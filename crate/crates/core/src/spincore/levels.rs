use std::fmt;

use super::operators::{Spin, SpinOperators};
use crate::error::{invalid, Result};
use crate::linalg::{eigh, hermiticity_error, CMat};

/// Dominant product-basis assignment of an eigenstate, stored as (2mS, 2mI).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LevelLabel {
    pub twice_ms: i32,
    pub twice_mi: i32,
}

impl LevelLabel {
    pub fn ms(&self) -> f64 {
        self.twice_ms as f64 / 2.0
    }

    pub fn mi(&self) -> f64 {
        self.twice_mi as f64 / 2.0
    }
}

impl fmt::Display for LevelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn half(t: i32) -> String {
            if t % 2 == 0 {
                format!("{}", t / 2)
            } else {
                format!("{t}/2")
            }
        }
        write!(f, "|{},{}>", half(self.twice_ms), half(self.twice_mi))
    }
}

/// Sorted eigen-decomposition of a spin Hamiltonian.
#[derive(Debug, Clone)]
pub struct LevelSet {
    /// Energies in MHz, ascending.
    pub energies: Vec<f64>,
    /// Eigenvectors as columns, in the |mS⟩⊗|mI⟩ product basis.
    pub states: CMat,
    pub labels: Vec<LevelLabel>,
    pub nuclear_spin: Spin,
}

impl LevelSet {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Transform a product-basis operator into the eigenbasis (W† O W).
    pub fn to_eigenbasis(&self, op: &CMat) -> CMat {
        self.states.adjoint() * op * &self.states
    }

    pub fn from_eigenbasis(&self, op: &CMat) -> CMat {
        &self.states * op * self.states.adjoint()
    }

    pub fn find(&self, label: LevelLabel) -> Option<usize> {
        let mut hits = self.labels.iter().enumerate().filter(|(_, l)| **l == label);
        let first = hits.next()?.0;
        if hits.next().is_some() {
            return None;
        }
        Some(first)
    }

    /// Level frequency difference E_j − E_i in MHz.
    pub fn gap(&self, i: usize, j: usize) -> f64 {
        self.energies[j] - self.energies[i]
    }
}

/// Exact diagonalization of a donor Hamiltonian; the nuclear spin is inferred
/// from the dimension 2(2I+1).
pub fn eigensystem(h: &CMat) -> Result<LevelSet> {
    let n = h.nrows();
    if n != h.ncols() || n < 2 || n % 2 != 0 {
        return invalid(format!("matrix of shape {:?} is not a donor Hamiltonian", h.shape()));
    }
    let herm = hermiticity_error(h);
    if herm > 1e-10 {
        return invalid(format!("matrix is not Hermitian (relative error {herm:.3e})"));
    }
    let nuclear_spin = Spin::from_twice((n / 2 - 1) as u32);
    let ops = SpinOperators::new(nuclear_spin);
    let (energies, states) = eigh(h)?;
    let labels = (0..n)
        .map(|col| {
            let mut best = 0;
            let mut best_abs = -1.0;
            for row in 0..n {
                let a = states[(row, col)].norm();
                // Ties go to the lower basis index.
                if a > best_abs + 1e-12 {
                    best = row;
                    best_abs = a;
                }
            }
            let (twice_ms, twice_mi) = ops.basis_label(best);
            LevelLabel { twice_ms, twice_mi }
        })
        .collect();
    Ok(LevelSet { energies, states, labels, nuclear_spin })
}
