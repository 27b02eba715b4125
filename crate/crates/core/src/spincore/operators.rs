use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{c, kron, CMat};

/// A spin quantum number, stored as twice its value so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Spin(u32);

impl Spin {
    pub const HALF: Spin = Spin(1);

    pub fn from_twice(twice: u32) -> Self {
        Spin(twice)
    }

    pub fn new(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !twice.is_finite() || twice < 0.0 || (twice - twice.round()).abs() > 1e-9 {
            return invalid(format!("spin {j} is not a non-negative half-integer"));
        }
        Ok(Spin(twice.round() as u32))
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn multiplicity(self) -> usize {
        self.0 as usize + 1
    }

    /// Twice the projections m, in descending order (+j first).
    pub fn twice_m_values(self) -> impl Iterator<Item = i32> {
        let tj = self.0 as i32;
        (0..=tj).map(move |k| tj - 2 * k)
    }
}

impl TryFrom<f64> for Spin {
    type Error = crate::error::Error;
    fn try_from(j: f64) -> Result<Self> {
        Spin::new(j)
    }
}

impl From<Spin> for f64 {
    fn from(s: Spin) -> f64 {
        s.value()
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Jx, Jy, Jz for spin `j` in the |j, m⟩ basis ordered m = j, j−1, …, −j.
pub fn spin_matrices(j: Spin) -> [CMat; 3] {
    let n = j.multiplicity();
    let jv = j.value();
    let mut jp = CMat::zeros(n, n);
    let mut jz = CMat::zeros(n, n);
    for (k, tm) in j.twice_m_values().enumerate() {
        let m = tm as f64 / 2.0;
        jz[(k, k)] = c(m);
        // J+|m⟩ = √(j(j+1) − m(m+1)) |m+1⟩, and |m+1⟩ sits at row k−1.
        if k > 0 {
            jp[(k - 1, k)] = c((jv * (jv + 1.0) - m * (m + 1.0)).sqrt());
        }
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * c(0.5);
    let jy = (&jp - &jm) * Complex64::new(0.0, -0.5);
    [jx, jy, jz]
}

/// Electron and nuclear spin operators embedded in the product space
/// |mS⟩ ⊗ |mI⟩.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub nuclear_spin: Spin,
    pub s: [CMat; 3],
    pub i: [CMat; 3],
}

impl SpinOperators {
    pub fn new(nuclear_spin: Spin) -> Self {
        let ns = nuclear_spin.multiplicity();
        let se = spin_matrices(Spin::HALF);
        let si = spin_matrices(nuclear_spin);
        let id_e = CMat::identity(2, 2);
        let id_n = CMat::identity(ns, ns);
        let s = [kron(&se[0], &id_n), kron(&se[1], &id_n), kron(&se[2], &id_n)];
        let i = [kron(&id_e, &si[0]), kron(&id_e, &si[1]), kron(&id_e, &si[2])];
        SpinOperators { nuclear_spin, s, i }
    }

    pub fn dim(&self) -> usize {
        2 * self.nuclear_spin.multiplicity()
    }

    /// Product-basis index of |mS, mI⟩ given twice the projections.
    pub fn basis_index(&self, twice_ms: i32, twice_mi: i32) -> usize {
        let ns = self.nuclear_spin.multiplicity();
        let s_idx = ((1 - twice_ms) / 2) as usize;
        let i_idx = ((self.nuclear_spin.twice() as i32 - twice_mi) / 2) as usize;
        s_idx * ns + i_idx
    }

    /// (2mS, 2mI) of a product-basis index.
    pub fn basis_label(&self, index: usize) -> (i32, i32) {
        let ns = self.nuclear_spin.multiplicity();
        let s_idx = (index / ns) as i32;
        let i_idx = (index % ns) as i32;
        (1 - 2 * s_idx, self.nuclear_spin.twice() as i32 - 2 * i_idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermiticity_error, max_abs};
    use proptest::prelude::*;

    #[test]
    fn spin_half_is_pauli_over_two() {
        let [jx, jy, jz] = spin_matrices(Spin::HALF);
        assert_eq!(jz[(0, 0)], c(0.5));
        assert_eq!(jz[(1, 1)], c(-0.5));
        assert_eq!(jx[(0, 1)], c(0.5));
        assert_eq!(jy[(0, 1)], Complex64::new(0.0, -0.5));
    }

    #[test]
    fn spin_three_halves_jz() {
        let [_, _, jz] = spin_matrices(Spin::new(1.5).unwrap());
        let diag: Vec<f64> = (0..4).map(|k| jz[(k, k)].re).collect();
        assert_eq!(diag, vec![1.5, 0.5, -0.5, -1.5]);
    }

    #[test]
    fn spin_nine_halves_casimir() {
        let j = Spin::new(4.5).unwrap();
        let [jx, jy, jz] = spin_matrices(j);
        let casimir = &jx * &jx + &jy * &jy + &jz * &jz;
        let expected = CMat::identity(10, 10) * c(4.5 * 5.5);
        assert!(max_abs(&(casimir - expected)) < 1e-12);
        assert!((4.5f64 * 5.5 - 24.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_half_integer() {
        assert!(Spin::new(0.3).is_err());
        assert!(Spin::new(-0.5).is_err());
    }

    #[test]
    fn basis_index_roundtrip() {
        let ops = SpinOperators::new(Spin::new(1.5).unwrap());
        for k in 0..ops.dim() {
            let (s, i) = ops.basis_label(k);
            assert_eq!(ops.basis_index(s, i), k);
        }
        assert_eq!(ops.basis_label(0), (1, 3));
    }

    proptest! {
        #[test]
        fn commutation_and_casimir(twice in 0u32..12) {
            let j = Spin::from_twice(twice);
            let [jx, jy, jz] = spin_matrices(j);
            for m in [&jx, &jy, &jz] {
                prop_assert!(hermiticity_error(m) < 1e-14);
            }
            let comm = &jx * &jy - &jy * &jx;
            prop_assert!(max_abs(&(comm - &jz * Complex64::new(0.0, 1.0))) < 1e-12);
            let jv = j.value();
            let cas = &jx * &jx + &jy * &jy + &jz * &jz;
            let n = j.multiplicity();
            prop_assert!(max_abs(&(cas - CMat::identity(n, n) * c(jv * (jv + 1.0)))) < 1e-11);
        }

        #[test]
        fn electron_and_nuclear_commute(twice in 1u32..10) {
            let ops = SpinOperators::new(Spin::from_twice(twice));
            for a in &ops.s {
                for b in &ops.i {
                    prop_assert!(max_abs(&(a * b - b * a)) < 1e-14);
                }
            }
            let s2 = &ops.s[0] * &ops.s[0] + &ops.s[1] * &ops.s[1] + &ops.s[2] * &ops.s[2];
            prop_assert!(max_abs(&(s2 - CMat::identity(ops.dim(), ops.dim()) * c(0.75))) < 1e-12);
        }
    }
}
