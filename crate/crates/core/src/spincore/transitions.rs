use serde::Serialize;

use super::hamiltonian::build_hamiltonian_with;
use super::levels::{eigensystem, LevelLabel, LevelSet};
use super::operators::SpinOperators;
use super::system::{SpinSystem, StaticField};
use crate::constants::PhysicalConstants;
use crate::error::{invalid, Error, Result};
use crate::linalg::{CMat, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TransitionClass {
    Esr,
    NmrSqt,
    NmrDqt,
    Other,
}

impl TransitionClass {
    pub fn from_deltas(delta_ms: i32, delta_mi: i32) -> Self {
        match (delta_ms.abs(), delta_mi.abs()) {
            (0, 1) => TransitionClass::NmrSqt,
            (0, 2) => TransitionClass::NmrDqt,
            (1, 0) => TransitionClass::Esr,
            _ => TransitionClass::Other,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TransitionClass::Esr => "ESR",
            TransitionClass::NmrSqt => "NMR-SQT",
            TransitionClass::NmrDqt => "NMR-DQT",
            TransitionClass::Other => "other",
        }
    }
}

/// A level pair i < j with its frequency and probe-operator weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub level_pair: (usize, usize),
    /// E_j − E_i in MHz.
    pub frequency: f64,
    /// |⟨i|probe|j⟩|².
    pub operator_weight: f64,
    pub delta_ms: i32,
    pub delta_mi: i32,
    pub class: TransitionClass,
    pub labels: (LevelLabel, LevelLabel),
}

/// Operator whose matrix elements weight each transition.
#[derive(Debug, Clone)]
pub enum Probe {
    Ix,
    Sx,
    Custom(CMat),
}

impl Probe {
    fn matrix(&self, levels: &LevelSet) -> Result<CMat> {
        let ops = SpinOperators::new(levels.nuclear_spin);
        let m = match self {
            Probe::Ix => ops.i[0].clone(),
            Probe::Sx => ops.s[0].clone(),
            Probe::Custom(m) => m.clone(),
        };
        if m.shape() != (levels.dim(), levels.dim()) {
            return invalid(format!(
                "probe shape {:?} does not match level dimension {}",
                m.shape(),
                levels.dim()
            ));
        }
        Ok(m)
    }
}

fn classify(a: LevelLabel, b: LevelLabel) -> (i32, i32, TransitionClass) {
    // Integer deltas from twice-m labels; both spins change by whole units.
    let dms = (b.twice_ms - a.twice_ms) / 2;
    let dmi = (b.twice_mi - a.twice_mi) / 2;
    (dms, dmi, TransitionClass::from_deltas(dms, dmi))
}

pub fn transition_table(levels: &LevelSet, probe: &Probe) -> Result<Vec<Transition>> {
    let op = levels.to_eigenbasis(&probe.matrix(levels)?);
    let n = levels.dim();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let (delta_ms, delta_mi, class) = classify(levels.labels[i], levels.labels[j]);
            out.push(Transition {
                level_pair: (i, j),
                frequency: levels.gap(i, j),
                operator_weight: op[(i, j)].norm_sqr(),
                delta_ms,
                delta_mi,
                class,
                labels: (levels.labels[i], levels.labels[j]),
            });
        }
    }
    Ok(out)
}

/// A resonance field for one hyperfine line.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPosition {
    /// Field magnitude (T) along the sweep direction.
    pub field: f64,
    pub transition: Transition,
}

const FIELD_SAMPLES: usize = 401;
const FIELD_TOLERANCE: f64 = 1e-6;

fn esr_frequency_at(
    sys: &SpinSystem,
    direction: &Vec3,
    b: f64,
    lower: LevelLabel,
    upper: LevelLabel,
    consts: &PhysicalConstants,
) -> Result<(f64, LevelSet)> {
    let field = StaticField::along(*direction, b)?;
    let levels = eigensystem(&build_hamiltonian_with(sys, &field, consts)?)?;
    let (i, j) = match (levels.find(lower), levels.find(upper)) {
        (Some(i), Some(j)) => (i, j),
        _ => {
            return Err(Error::Numerical(format!(
                "cannot track ESR line {lower}→{upper} at {b} T (ambiguous level labels)"
            )))
        }
    };
    Ok(((levels.energies[j] - levels.energies[i]).abs(), levels))
}

/// Fields in `b_range` at which each ESR hyperfine line (ΔmS = ±1, ΔmI = 0)
/// is resonant with `f_probe_ghz`. Lines that coincide to within the
/// bisection tolerance are reported once.
pub fn esr_field_positions(
    sys: &SpinSystem,
    f_probe_ghz: f64,
    b_range: (f64, f64),
    direction: Vec3,
) -> Result<Vec<FieldPosition>> {
    let consts = PhysicalConstants::default();
    if !(f_probe_ghz > 0.0) {
        return invalid("probe frequency must be positive");
    }
    let (b_lo, b_hi) = b_range;
    if !(b_lo >= 0.0 && b_hi > b_lo) {
        return invalid("field range must satisfy 0 ≤ b_lo < b_hi");
    }
    let target = f_probe_ghz * 1e3;
    let mut out: Vec<FieldPosition> = Vec::new();
    for twice_mi in sys.nuclear_spin.twice_m_values() {
        let lower = LevelLabel { twice_ms: -1, twice_mi };
        let upper = LevelLabel { twice_ms: 1, twice_mi };
        let f = |b: f64| esr_frequency_at(sys, &direction, b, lower, upper, &consts).map(|r| r.0 - target);
        let grid: Vec<f64> = (0..FIELD_SAMPLES)
            .map(|k| b_lo + (b_hi - b_lo) * k as f64 / (FIELD_SAMPLES - 1) as f64)
            .collect();
        let values = grid.iter().map(|&b| f(b)).collect::<Result<Vec<_>>>()?;
        let increasing = values.windows(2).all(|w| w[1] >= w[0]);
        let decreasing = values.windows(2).all(|w| w[1] <= w[0]);
        if !(increasing || decreasing) {
            return invalid(format!("ESR line mI = {} is not monotone in the field range", twice_mi as f64 / 2.0));
        }
        let Some(k) = values.windows(2).position(|w| w[0] == 0.0 || w[0].signum() != w[1].signum()) else {
            continue;
        };
        let (mut lo, mut hi) = (grid[k], grid[k + 1]);
        let mut f_lo = values[k];
        while hi - lo > FIELD_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            let f_mid = f(mid)?;
            if f_mid == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if f_mid.signum() == f_lo.signum() {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        let b = 0.5 * (lo + hi);
        if out.iter().any(|p| (p.field - b).abs() < 2.0 * FIELD_TOLERANCE) {
            continue;
        }
        let (freq, levels) = esr_frequency_at(sys, &direction, b, lower, upper, &consts)?;
        let (i, j) = (levels.find(lower).unwrap(), levels.find(upper).unwrap());
        let (i, j) = if levels.energies[i] <= levels.energies[j] { (i, j) } else { (j, i) };
        let sx = levels.to_eigenbasis(&SpinOperators::new(sys.nuclear_spin).s[0]);
        let (delta_ms, delta_mi, class) = classify(levels.labels[i], levels.labels[j]);
        out.push(FieldPosition {
            field: b,
            transition: Transition {
                level_pair: (i, j),
                frequency: freq,
                operator_weight: sx[(i, j)].norm_sqr(),
                delta_ms,
                delta_mi,
                class,
                labels: (levels.labels[i], levels.labels[j]),
            },
        });
    }
    out.sort_by(|a, b| a.field.total_cmp(&b.field));
    Ok(out)
}
