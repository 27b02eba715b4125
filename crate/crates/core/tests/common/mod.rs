#![allow(dead_code)]

use ednmr_core::linalg::CMat;
use ednmr_core::spincore::{levels, species, transition_table, LevelSet, Probe, SpinSystem, StaticField, TransitionClass};

pub fn system(label: &str) -> SpinSystem {
    species::builtin(label).unwrap()
}

pub fn working_field() -> StaticField {
    StaticField::along_z(0.25)
}

pub fn working_levels(label: &str) -> LevelSet {
    levels(&system(label), &working_field()).unwrap()
}

/// (pair, frequency in Hz) of every transition of `class`, lowest first.
pub fn transitions_of(lv: &LevelSet, class: TransitionClass) -> Vec<((usize, usize), f64)> {
    let mut v: Vec<_> = transition_table(lv, &Probe::Ix)
        .unwrap()
        .into_iter()
        .filter(|t| t.class == class)
        .map(|t| (t.level_pair, t.frequency.abs() * 1e6))
        .collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1));
    v
}

pub fn lowest_sqt(lv: &LevelSet) -> ((usize, usize), f64) {
    transitions_of(lv, TransitionClass::NmrSqt)[0]
}

/// Index of an ESR line (as ordered by `esr_lines`) sharing a level with `pair`.
pub fn esr_line_touching(lines: &[(usize, usize)], pair: (usize, usize)) -> usize {
    lines
        .iter()
        .position(|&(a, b)| a == pair.0 || a == pair.1 || b == pair.0 || b == pair.1)
        .expect("no ESR line shares a level with the pair")
}

/// Closed-form energies (MHz) of an isotropic S = I = 1/2 system with
/// electron and nuclear Zeeman frequencies `ve`, `vn` (MHz) and coupling `a`.
pub fn breit_rabi(ve: f64, vn: f64, a: f64) -> [f64; 4] {
    let root = 0.5 * ((ve + vn).powi(2) + a * a).sqrt();
    let mut e = [0.5 * (ve - vn) + a / 4.0, -0.5 * (ve - vn) + a / 4.0, -a / 4.0 + root, -a / 4.0 - root];
    e.sort_by(f64::total_cmp);
    e
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

pub fn population(u: &CMat, from: usize, to: usize) -> f64 {
    u[(to, from)].norm_sqr()
}
