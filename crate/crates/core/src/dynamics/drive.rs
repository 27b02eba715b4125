use nalgebra::Vector3;

use crate::constants::PhysicalConstants;
use crate::error::Result;
use crate::linalg::{c, linear, CMat, Vec3};
use crate::spincore::{SpinOperators, SpinSystem};
use crate::starkdrive::HarmonicDrive;

/// Time dependence of one drive component at harmonic n of the carrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Waveform {
    /// Constant in time.
    Dc,
    /// sin(2π n f t + n φ).
    Sin,
    /// cos(2π n f t + n φ).
    Cos,
}

#[derive(Debug, Clone)]
pub struct DriveComponent {
    /// Product-basis operator amplitude (MHz).
    pub operator: CMat,
    pub harmonic: u32,
    pub waveform: Waveform,
}

/// A time-dependent perturbation δH(t) = Σ V_k w_k(t) at one carrier.
#[derive(Debug, Clone)]
pub struct Drive {
    /// Carrier frequency f (Hz).
    pub carrier: f64,
    /// Phase φ of the carrier (rad), referenced to the start of the pulse.
    pub phase: f64,
    pub components: Vec<DriveComponent>,
}

impl Drive {
    pub fn none(carrier: f64) -> Self {
        Drive { carrier, phase: 0.0, components: Vec::new() }
    }

    pub fn with(mut self, other: Drive) -> Self {
        self.components.extend(other.components);
        self
    }
}

impl From<&HarmonicDrive> for Drive {
    fn from(h: &HarmonicDrive) -> Self {
        let components = h
            .components
            .iter()
            .map(|(&n, v)| DriveComponent {
                operator: v.clone(),
                harmonic: n,
                waveform: match n {
                    0 => Waveform::Dc,
                    1 => Waveform::Sin,
                    _ => Waveform::Cos,
                },
            })
            .collect();
        Drive { carrier: h.carrier, phase: 0.0, components }
    }
}

/// Zeeman operator of an oscillating field B (T): β B·ĝ·S − βₙ gₙ B·I, in MHz.
pub fn zeeman_operator(sys: &SpinSystem, b: &Vec3) -> CMat {
    let consts = PhysicalConstants::default();
    let ops = SpinOperators::new(sys.nuclear_spin);
    let electron = sys.g_tensor.transpose() * b * consts.bohr_mhz_per_t();
    let nuclear: Vector3<f64> = b * (-consts.nuclear_magneton_over_h * sys.nuclear_g);
    linear(&electron, &ops.s) + linear(&nuclear, &ops.i)
}

/// Magnetic RF drive B(t) = B cos(2πft).
pub fn magnetic_drive(sys: &SpinSystem, b: &Vec3, carrier: f64) -> Result<Drive> {
    Ok(Drive {
        carrier,
        phase: 0.0,
        components: vec![DriveComponent { operator: zeeman_operator(sys, b) * c(1.0), harmonic: 1, waveform: Waveform::Cos }],
    })
}
