//! Electric-field modulation of the g, hyperfine and quadrupole tensors and
//! the resulting drive operators, harmonic content and Rabi rates.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{invalid, Error, Result};
use crate::linalg::{bilinear, c, hermiticity_error, is_symmetric, linear, CMat, Real3, Vec3};
use crate::spincore::{LevelSet, SpinOperators, SpinSystem, StaticField};

pub const BUILTIN_COEFFICIENTS: &str = include_str!("../data/drive_coefficients.toml");

/// Response of the three spin-Hamiltonian tensors to one power of the field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TensorSet {
    pub g: Real3,
    pub hyperfine: Real3,
    pub quadrupole: Real3,
}

impl TensorSet {
    pub fn zeros() -> Self {
        TensorSet { g: Real3::zeros(), hyperfine: Real3::zeros(), quadrupole: Real3::zeros() }
    }

    pub fn scaled(&self, k: f64) -> Self {
        TensorSet { g: self.g * k, hyperfine: self.hyperfine * k, quadrupole: self.quadrupole * k }
    }

    pub fn is_zero(&self) -> bool {
        self.g.iter().chain(self.hyperfine.iter()).chain(self.quadrupole.iter()).all(|v| *v == 0.0)
    }

    fn sum(&self, other: &TensorSet) -> Self {
        TensorSet {
            g: self.g + other.g,
            hyperfine: self.hyperfine + other.hyperfine,
            quadrupole: self.quadrupole + other.quadrupole,
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        for (name, t) in [("g", &self.g), ("A", &self.hyperfine), ("Q", &self.quadrupole)] {
            if !is_symmetric(t, 1e-12) {
                return invalid(format!("{what} {name} response is not symmetric"));
            }
        }
        let q = &self.quadrupole;
        if q.trace().abs() > 1e-9 * q.norm() {
            return invalid(format!("{what} Q response is not traceless"));
        }
        Ok(())
    }
}

/// Tensor perturbations (δg, δA, δQ) at one instant or amplitude.
pub type TensorPerturbation = TensorSet;

/// Linear and quadratic electric-field response of a donor.
///
/// Coefficients are expressed in the laboratory frame of the static field:
/// g responses per V/m (linear) and per (V/m)² (quadratic), A and Q in MHz
/// per the same units. `strain_scale` multiplies every linear coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveModel {
    pub field_direction: Vec3,
    pub linear: TensorSet,
    pub quadratic: TensorSet,
    pub strain_scale: f64,
    /// Sign relating the 2f component to the DC one, V₂ = sign · V₀. The sin²
    /// identity for E(t) = E sin(2πft) gives −1.
    pub subharmonic_sign: f64,
    /// Field amplitude (V/m) at which the species is normally operated.
    pub operating_field: Option<f64>,
}

impl DriveModel {
    pub fn new(field_direction: Vec3, linear: TensorSet, quadratic: TensorSet, strain_scale: f64) -> Result<Self> {
        let n = field_direction.norm();
        if !(n > 0.0) || !n.is_finite() {
            return invalid("field direction must be a non-zero vector");
        }
        linear.validate("linear")?;
        quadratic.validate("quadratic")?;
        Ok(DriveModel {
            field_direction: field_direction / n,
            linear,
            quadratic,
            strain_scale,
            subharmonic_sign: -1.0,
            operating_field: None,
        })
    }

    pub fn without_quadratic(&self) -> Self {
        DriveModel { quadratic: TensorSet::zeros(), ..self.clone() }
    }

    pub fn without_linear(&self) -> Self {
        DriveModel { strain_scale: 0.0, ..self.clone() }
    }

    /// Keeps only the g-tensor responses.
    pub fn g_only(&self) -> Self {
        let keep = |t: &TensorSet| TensorSet { g: t.g, ..TensorSet::zeros() };
        DriveModel { linear: keep(&self.linear), quadratic: keep(&self.quadratic), ..self.clone() }
    }

    fn effective_linear(&self) -> TensorSet {
        self.linear.scaled(self.strain_scale)
    }
}

/// δT = strain·L_T·E + K_T·E² for a static field of amplitude `e_amp` along
/// the model's field direction.
pub fn tensor_response(drive: &DriveModel, e_amp: f64) -> TensorPerturbation {
    drive.effective_linear().scaled(e_amp).sum(&drive.quadratic.scaled(e_amp * e_amp))
}

/// Angle between the electron quantization axes ĝ·B₀ and (ĝ+δg)·B₀.
pub fn quantization_tilt(g: &Real3, dg: &Real3, field: &StaticField) -> Result<f64> {
    let b = field.vector();
    if b.norm() == 0.0 {
        return invalid("quantization tilt is undefined at zero field");
    }
    let u = g * b;
    let v = (g + dg) * b;
    // atan2 of |u×v| and u·v stays accurate for tiny angles.
    Ok(u.cross(&v).norm().atan2(u.dot(&v)))
}

/// Which eigenbasis elements survive the rotating-wave approximation.
#[derive(Debug, Clone, Copy)]
pub struct SecularWindow<'a> {
    pub levels: &'a LevelSet,
    /// Drive carrier f (Hz).
    pub carrier: f64,
    /// Harmonic n of the carrier the operator oscillates at.
    pub harmonic: u32,
    /// Keep ⟨i|V|j⟩ when ||f_ij| − n f| is below this (Hz).
    pub window: f64,
}

#[derive(Debug, Clone)]
pub struct DriveOperator {
    /// Product-basis operator (MHz).
    pub full: CMat,
    /// Eigenbasis operator with non-secular elements removed (MHz).
    pub secular: Option<CMat>,
}

/// V = β B₀·δg·S + S·δA·I + I·δQ·I in MHz.
pub fn drive_operator(
    sys: &SpinSystem,
    pert: &TensorPerturbation,
    field: &StaticField,
    window: Option<SecularWindow<'_>>,
) -> Result<DriveOperator> {
    let ops = SpinOperators::new(sys.nuclear_spin);
    let consts = PhysicalConstants::default();
    let b = field.vector();
    let zeeman = pert.g.transpose() * b * consts.bohr_mhz_per_t();
    let full = linear(&zeeman, &ops.s) + bilinear(&ops.s, &pert.hyperfine, &ops.i) + bilinear(&ops.i, &pert.quadrupole, &ops.i);
    let secular = window.map(|w| secular_reduce(w.levels, &full, w.carrier, w.harmonic, w.window));
    Ok(DriveOperator { full, secular })
}

/// Eigenbasis matrix of `op` keeping only elements within `window` Hz of
/// resonance with harmonic `n` of `carrier`.
pub fn secular_reduce(levels: &LevelSet, op: &CMat, carrier: f64, n: u32, window: f64) -> CMat {
    let mut v = levels.to_eigenbasis(op);
    let dim = levels.dim();
    for i in 0..dim {
        for j in 0..dim {
            let f_ij = levels.gap(i, j).abs() * 1e6;
            if (f_ij - n as f64 * carrier).abs() >= window {
                v[(i, j)] = c(0.0);
            }
        }
    }
    v
}

/// δH(t) = V₀ + V₁ sin(2πft) + V₂ cos(4πft), operators in MHz.
#[derive(Debug, Clone)]
pub struct HarmonicDrive {
    /// Applied RF frequency f (Hz).
    pub carrier: f64,
    pub components: BTreeMap<u32, CMat>,
}

impl HarmonicDrive {
    pub fn component(&self, n: u32) -> Option<&CMat> {
        self.components.get(&n)
    }
}

/// Harmonic decomposition of the drive for E(t) = e_amp·sin(2πft).
pub fn harmonic_components(
    drive: &DriveModel,
    sys: &SpinSystem,
    field: &StaticField,
    e_amp: f64,
    f: f64,
) -> Result<HarmonicDrive> {
    if !(e_amp >= 0.0) {
        return invalid("field amplitude must be non-negative");
    }
    if !(f > 0.0) {
        return invalid("carrier frequency must be positive");
    }
    let mut components = BTreeMap::new();
    let lin = drive.effective_linear();
    if !lin.is_zero() {
        let v1 = drive_operator(sys, &lin.scaled(e_amp), field, None)?.full;
        components.insert(1, v1);
    }
    if !drive.quadratic.is_zero() {
        // sin²x = (1 − cos 2x)/2
        let half = drive_operator(sys, &drive.quadratic.scaled(0.5 * e_amp * e_amp), field, None)?.full;
        components.insert(2, &half * c(drive.subharmonic_sign));
        components.insert(0, half);
    }
    for (n, v) in &components {
        let err = hermiticity_error(v);
        if err > 1e-10 && v.norm() > 0.0 {
            return Err(Error::Numerical(format!("harmonic {n} operator not Hermitian ({err:.2e})")));
        }
    }
    Ok(HarmonicDrive { carrier: f, components })
}

/// Rabi rate Ω = |⟨i|V_n|j⟩| (Hz) for the n-th harmonic driving the pair.
///
/// The carrier must satisfy |n·f − f_ij| < tolerance; `None` uses the
/// power-broadening window Ω/2.
pub fn rabi_rate(levels: &LevelSet, harmonic: &HarmonicDrive, pair: (usize, usize), n: u32, tolerance: Option<f64>) -> Result<f64> {
    let (i, j) = pair;
    if i >= levels.dim() || j >= levels.dim() || i == j {
        return invalid(format!("invalid level pair {pair:?}"));
    }
    if n == 0 {
        return invalid("harmonic 0 is static and cannot drive a transition");
    }
    let omega = match harmonic.component(n) {
        Some(v) => levels.to_eigenbasis(v)[(i, j)].norm() * 1e6,
        None => 0.0,
    };
    let f_ij = levels.gap(i, j).abs() * 1e6;
    let detuning = (n as f64 * harmonic.carrier - f_ij).abs();
    let tol = tolerance.unwrap_or(omega / 2.0);
    if detuning > tol || (tol == 0.0 && detuning > 0.0) {
        return Err(Error::NoResonantHarmonic(format!(
            "harmonic {n} of {:.6} MHz is {:.3e} Hz from the {:.6} MHz transition (tolerance {:.3e} Hz)",
            harmonic.carrier * 1e-6,
            detuning,
            f_ij * 1e-6,
            tol
        )));
    }
    Ok(omega)
}

// ---------------------------------------------------------------------------
// Coefficient file

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TensorName {
    #[serde(rename = "g")]
    G,
    #[serde(rename = "A")]
    A,
    #[serde(rename = "Q")]
    Q,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientEntry {
    pub tensor: TensorName,
    pub order: Order,
    /// Two axis letters, e.g. "zx"; the transposed entry is filled too.
    pub index: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesCoefficients {
    pub field_direction: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operating_field_v_per_m: Option<f64>,
    #[serde(default)]
    pub entries: Vec<CoefficientEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientFile {
    pub strain_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subharmonic_sign: Option<f64>,
    pub species: BTreeMap<String, SpeciesCoefficients>,
}

fn axis(ch: char) -> Result<usize> {
    match ch {
        'x' => Ok(0),
        'y' => Ok(1),
        'z' => Ok(2),
        _ => Err(Error::Parse(format!("unknown axis '{ch}'"))),
    }
}

impl CoefficientFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("drive coefficients: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_COEFFICIENTS).expect("built-in coefficients parse")
    }

    pub fn model(&self, label: &str) -> Result<DriveModel> {
        let sp = self
            .species
            .get(label)
            .ok_or_else(|| Error::NotFound(format!("drive coefficients for species {label}")))?;
        let mut lin = TensorSet::zeros();
        let mut quad = TensorSet::zeros();
        for e in &sp.entries {
            let chars: Vec<char> = e.index.chars().collect();
            if chars.len() != 2 {
                return Err(Error::Parse(format!("index '{}' must be two axis letters", e.index)));
            }
            let (p, q) = (axis(chars[0])?, axis(chars[1])?);
            let set = match e.order {
                Order::Linear => &mut lin,
                Order::Quadratic => &mut quad,
            };
            let t = match e.tensor {
                TensorName::G => &mut set.g,
                TensorName::A => &mut set.hyperfine,
                TensorName::Q => &mut set.quadrupole,
            };
            t[(p, q)] = e.value;
            t[(q, p)] = e.value;
        }
        let [x, y, z] = sp.field_direction;
        let mut model = DriveModel::new(Vec3::new(x, y, z), lin, quad, self.strain_scale)?;
        if let Some(s) = self.subharmonic_sign {
            model.subharmonic_sign = s;
        }
        model.operating_field = sp.operating_field_v_per_m;
        Ok(model)
    }
}

pub fn builtin_model(label: &str) -> Result<DriveModel> {
    CoefficientFile::builtin().model(label)
}
