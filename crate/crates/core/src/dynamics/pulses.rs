use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{c, CMat};
use crate::spincore::LevelSet;

/// Ideal rotation by `angle` about an axis at `phase` in the x-y plane of
/// the (i, j) subspace; identity elsewhere. Returned in the eigenbasis.
pub fn selective_pulse(levels: &LevelSet, pair: (usize, usize), angle: f64, phase: f64) -> Result<CMat> {
    let (i, j) = pair;
    let n = levels.dim();
    if i == j {
        return invalid("selective pulse needs two distinct levels");
    }
    if i >= n || j >= n {
        return invalid(format!("level pair {pair:?} out of range for dimension {n}"));
    }
    let (s, co) = (0.5 * angle).sin_cos();
    let mut u = CMat::identity(n, n);
    u[(i, i)] = c(co);
    u[(j, j)] = c(co);
    u[(i, j)] = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, -phase);
    u[(j, i)] = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, phase);
    Ok(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    MicrowaveB1,
    RfB2,
    RfE2,
}

/// Rectangular pulse. `amplitude` is in T for the magnetic channels and in
/// V/m for the electric one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub channel: Channel,
    pub carrier: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub duration: f64,
}

impl Pulse {
    pub fn new(channel: Channel, carrier: f64, amplitude: f64, phase: f64, duration: f64) -> Result<Self> {
        if !(duration > 0.0) {
            return invalid("pulse duration must be positive");
        }
        if !(amplitude >= 0.0) {
            return invalid("pulse amplitude must be non-negative");
        }
        if !carrier.is_finite() || carrier < 0.0 {
            return invalid("pulse carrier must be a non-negative frequency");
        }
        Ok(Pulse { channel, carrier, amplitude, phase, duration })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Pulse(Pulse),
    Delay(f64),
}

/// Population-difference readout across an ESR pair (lower level first).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Readout {
    pub pair: (usize, usize),
}

impl Readout {
    /// p_lower − p_upper.
    pub fn signal(&self, levels: &LevelSet, rho_eigen: &CMat) -> f64 {
        let (a, b) = self.ordered(levels);
        rho_eigen[(a, a)].re - rho_eigen[(b, b)].re
    }

    pub fn ordered(&self, levels: &LevelSet) -> (usize, usize) {
        let (i, j) = self.pair;
        if levels.energies[i] <= levels.energies[j] {
            (i, j)
        } else {
            (j, i)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pub elements: Vec<Element>,
    pub readout: Readout,
}

impl PulseSequence {
    pub fn new(elements: Vec<Element>, readout: Readout) -> Result<Self> {
        if elements.is_empty() {
            return invalid("pulse sequence is empty");
        }
        for e in &elements {
            if let Element::Delay(t) = e {
                if !(*t >= 0.0) {
                    return invalid("delay must be non-negative");
                }
            }
        }
        Ok(PulseSequence { elements, readout })
    }

    pub fn total_duration(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| match e {
                Element::Pulse(p) => p.duration,
                Element::Delay(t) => *t,
            })
            .sum()
    }
}
