use serde::{Deserialize, Serialize};

use super::operators::Spin;
use crate::error::{invalid, Result};
use crate::linalg::{is_symmetric, Real3, Vec3};

/// One donor species: an S = 1/2 electron coupled to a nuclear spin I.
/// Tensors are in the crystal frame; hyperfine and quadrupole in MHz.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    pub label: String,
    pub nuclear_spin: Spin,
    pub g_tensor: Real3,
    pub hyperfine_tensor: Real3,
    pub nuclear_g: f64,
    pub quadrupole_tensor: Real3,
}

impl SpinSystem {
    pub fn isotropic(label: &str, nuclear_spin: Spin, g: f64, hyperfine_mhz: f64, nuclear_g: f64) -> Self {
        SpinSystem {
            label: label.to_string(),
            nuclear_spin,
            g_tensor: Real3::identity() * g,
            hyperfine_tensor: Real3::identity() * hyperfine_mhz,
            nuclear_g,
            quadrupole_tensor: Real3::zeros(),
        }
    }

    pub fn with_quadrupole(mut self, q: Real3) -> Self {
        self.quadrupole_tensor = q;
        self
    }

    pub fn electron_spin(&self) -> Spin {
        Spin::HALF
    }

    pub fn dim(&self) -> usize {
        2 * self.nuclear_spin.multiplicity()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("g", &self.g_tensor),
            ("hyperfine", &self.hyperfine_tensor),
            ("quadrupole", &self.quadrupole_tensor),
        ] {
            if t.iter().any(|v| !v.is_finite()) {
                return invalid(format!("{name} tensor has non-finite entries"));
            }
            if !is_symmetric(t, 1e-12) {
                return invalid(format!("{name} tensor is not symmetric"));
            }
        }
        if !self.nuclear_g.is_finite() {
            return invalid("nuclear g-factor is not finite");
        }
        if self.nuclear_spin.twice() == 0 {
            return invalid("nuclear spin must be at least 1/2");
        }
        let q = &self.quadrupole_tensor;
        if q.trace().abs() > 1e-9 * q.norm() {
            return invalid("quadrupole tensor must be traceless");
        }
        // A quadrupole moment needs I ≥ 1.
        if self.nuclear_spin.twice() < 2 && q.norm() != 0.0 {
            return invalid("quadrupole tensor must vanish for I = 1/2");
        }
        Ok(())
    }

    /// The system seen in a frame rotated by `r` (all tensors T → R T Rᵀ).
    pub fn rotated(&self, r: &Real3) -> SpinSystem {
        let rt = r.transpose();
        SpinSystem {
            label: self.label.clone(),
            nuclear_spin: self.nuclear_spin,
            g_tensor: r * self.g_tensor * rt,
            hyperfine_tensor: r * self.hyperfine_tensor * rt,
            nuclear_g: self.nuclear_g,
            quadrupole_tensor: r * self.quadrupole_tensor * rt,
        }
    }
}

/// Axial/rhombic quadrupole tensor with principal values
/// P·(−(1−η), −(1+η), 2) along the crystal axes.
pub fn quadrupole_from_principal(p_mhz: f64, eta: f64) -> Real3 {
    Real3::from_diagonal(&Vec3::new(-p_mhz * (1.0 - eta), -p_mhz * (1.0 + eta), 2.0 * p_mhz))
}

/// Static laboratory field B₀ (tesla).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticField {
    pub b0: [f64; 3],
}

impl StaticField {
    pub fn new(b0: Vec3) -> Result<Self> {
        if b0.iter().any(|v| !v.is_finite()) {
            return invalid("static field has non-finite components");
        }
        Ok(StaticField { b0: [b0.x, b0.y, b0.z] })
    }

    pub fn along_z(tesla: f64) -> Self {
        StaticField { b0: [0.0, 0.0, tesla] }
    }

    pub fn along(direction: Vec3, tesla: f64) -> Result<Self> {
        let n = direction.norm();
        if n == 0.0 || !n.is_finite() {
            return invalid("field direction must be a non-zero finite vector");
        }
        StaticField::new(direction / n * tesla)
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.b0[0], self.b0[1], self.b0[2])
    }

    pub fn magnitude(&self) -> f64 {
        self.vector().norm()
    }
}
