//! Interaction-frame propagation under a rotating-wave-reduced drive.
//!
//! The static Hamiltonian, together with any DC part of the drive, is
//! diagonalized once; every oscillating drive matrix element ⟨k|V|l⟩ then
//! rotates at e^{i2π(f_kl ± n f)t}. Elements far from resonance
//! are dropped and the rest are integrated with a fourth-order Magnus
//! scheme on a uniform step.

use num_complex::Complex64;

use super::drive::{Drive, DriveComponent, Waveform};
use super::state::DensityState;
use crate::error::{invalid, Error, Result};
use crate::linalg::{c, eigh, expm_from_eigh, expm_hermitian, CMat, I};
use crate::spincore::LevelSet;

/// Rule deciding which rotating terms survive the rotating-wave approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RwaWindow {
    /// Keep terms whose rotation frequency is below this many Hz.
    Fixed(f64),
    /// Keep a term when its rotation frequency is below `factor` times its
    /// own coupling strength.
    Adaptive(f64),
}

impl Default for RwaWindow {
    fn default() -> Self {
        RwaWindow::Adaptive(25.0)
    }
}

/// Rotations slower than this (Hz) are treated as static.
const STATIC_DETUNING: f64 = 1e-4;

/// Steps per fastest retained period required by the integrator.
pub const POINTS_PER_PERIOD: f64 = 20.0;

#[derive(Debug, Clone, Copy)]
struct Term {
    row: usize,
    col: usize,
    /// Coupling amplitude (Hz).
    amp: Complex64,
    /// Rotation frequency (Hz).
    detuning: f64,
}

/// Eigenbasis of H₀ + V₀ expressed in the eigenbasis of H₀.
#[derive(Debug, Clone)]
struct Dressing {
    basis: CMat,
    bare: Vec<f64>,
    dressed: Vec<f64>,
}

impl Dressing {
    fn new(levels: &LevelSet, dc: &[&DriveComponent]) -> Self {
        let mut h = CMat::from_diagonal(&nalgebra::DVector::from_iterator(levels.dim(), levels.energies.iter().map(|e| c(*e))));
        for comp in dc {
            h += levels.to_eigenbasis(&comp.operator);
        }
        let (dressed, mut basis) = eigh(&h).expect("square Hamiltonian");
        for mut col in basis.column_iter_mut() {
            let k = (0..col.len()).max_by(|&a, &b| col[a].norm().total_cmp(&col[b].norm())).unwrap_or(0);
            let z = col[k];
            col *= z.conj() / z.norm();
        }
        Dressing { basis, bare: levels.energies.clone(), dressed }
    }

    /// e^{iH₀t} W e^{−iH't}: maps dressed interaction-frame states into the
    /// bare interaction frame at time t.
    fn at(&self, t: f64) -> CMat {
        let w = 2.0 * std::f64::consts::PI * 1e6 * t;
        CMat::from_fn(self.basis.nrows(), self.basis.ncols(), |k, l| {
            self.basis[(k, l)] * Complex64::from_polar(1.0, w * (self.bare[k] - self.dressed[l]))
        })
    }
}

#[derive(Debug, Clone)]
pub struct InteractionFrame {
    dim: usize,
    terms: Vec<Term>,
    dressing: Option<Dressing>,
}

impl InteractionFrame {
    pub fn new(levels: &LevelSet, drive: &Drive, window: RwaWindow) -> Self {
        let dim = levels.dim();
        let dc: Vec<&DriveComponent> = drive
            .components
            .iter()
            .filter(|comp| comp.waveform == Waveform::Dc && comp.operator.iter().any(|z| z.norm() > 0.0))
            .collect();
        let dressing = if dc.is_empty() { None } else { Some(Dressing::new(levels, &dc)) };
        let energies = dressing.as_ref().map_or(&levels.energies, |d| &d.dressed);
        let mut terms = Vec::new();
        for comp in drive.components.iter().filter(|comp| comp.waveform != Waveform::Dc) {
            let mut v = levels.to_eigenbasis(&comp.operator);
            if let Some(d) = &dressing {
                v = d.basis.adjoint() * v * &d.basis;
            }
            let n = comp.harmonic as f64;
            let np = n * drive.phase;
            let coefs: Vec<(f64, Complex64)> = match comp.waveform {
                Waveform::Dc => unreachable!(),
                Waveform::Cos => vec![
                    (1.0, Complex64::from_polar(0.5, np)),
                    (-1.0, Complex64::from_polar(0.5, -np)),
                ],
                Waveform::Sin => vec![
                    (1.0, Complex64::from_polar(0.5, np) / I),
                    (-1.0, -Complex64::from_polar(0.5, -np) / I),
                ],
            };
            for row in 0..dim {
                for col in 0..dim {
                    let vkl = v[(row, col)] * 1e6;
                    if vkl.norm() == 0.0 {
                        continue;
                    }
                    let f_kl = (energies[row] - energies[col]) * 1e6;
                    for &(s, coef) in &coefs {
                        let detuning = f_kl + s * n * drive.carrier;
                        let amp = vkl * coef;
                        let keep = match window {
                            RwaWindow::Fixed(w) => detuning.abs() < w,
                            RwaWindow::Adaptive(k) => detuning.abs() < k * amp.norm(),
                        };
                        if keep {
                            terms.push(Term { row, col, amp, detuning });
                        }
                    }
                }
            }
        }
        InteractionFrame { dim, terms, dressing }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when the drive has no effect at all: no DC part and no
    /// oscillating term surviving the rotating-wave reduction.
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty() && self.dressing.is_none()
    }

    /// True when nothing couples distinct levels.
    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|t| t.row == t.col)
    }

    pub fn is_static(&self) -> bool {
        self.terms.iter().all(|t| t.detuning.abs() < STATIC_DETUNING)
    }

    /// Retained coupling between two levels, summed over terms, ignoring
    /// rotation (Hz). Levels are those of H₀ + V₀ when the drive has a DC part.
    pub fn coupling(&self, i: usize, j: usize) -> Complex64 {
        self.terms.iter().filter(|t| t.row == i && t.col == j).map(|t| t.amp).sum()
    }

    /// Fastest rate (Hz) among retained rotations and couplings.
    pub fn fastest_rate(&self) -> f64 {
        let mut abs = vec![0.0; self.dim * self.dim];
        let mut rate: f64 = 0.0;
        for t in &self.terms {
            abs[t.row * self.dim + t.col] += t.amp.norm();
            rate = rate.max(t.detuning.abs());
        }
        let coupling = abs.iter().map(|a| a * a).sum::<f64>().sqrt();
        rate.max(coupling)
    }

    /// Largest step satisfying the points-per-period rule.
    pub fn max_step(&self) -> f64 {
        let rate = self.fastest_rate();
        if rate == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (POINTS_PER_PERIOD * rate)
        }
    }

    /// H̃(t) in Hz, in the (possibly dressed) level basis.
    pub fn hamiltonian_at(&self, t: f64) -> CMat {
        let mut h = CMat::zeros(self.dim, self.dim);
        for term in &self.terms {
            let phase = if term.detuning.abs() < STATIC_DETUNING {
                c(1.0)
            } else {
                Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * term.detuning * t)
            };
            h[(term.row, term.col)] += term.amp * phase;
        }
        h
    }

    fn check_step(&self, step: f64) -> Result<()> {
        if !(step > 0.0) {
            return invalid("integration step must be positive");
        }
        let max_step = self.max_step();
        if step > max_step * (1.0 + 1e-12) {
            return Err(Error::StepTooCoarse { step, max_step });
        }
        Ok(())
    }

    /// One fourth-order Magnus step from t to t + h.
    fn magnus_step(&self, t: f64, h: f64) -> Result<CMat> {
        let r = 3f64.sqrt() / 6.0;
        let h1 = self.hamiltonian_at(t + h * (0.5 - r));
        let h2 = self.hamiltonian_at(t + h * (0.5 + r));
        let two_pi = 2.0 * std::f64::consts::PI;
        // A = −i2πH; Ω = h/2 (A₁ + A₂) + √3h²/12 [A₂, A₁]; K = iΩ is Hermitian.
        let comm = &h2 * &h1 - &h1 * &h2;
        let k = (&h1 + &h2) * c(0.5 * h * two_pi) + comm * (I * (-(two_pi * two_pi) * 3f64.sqrt() * h * h / 12.0));
        expm_hermitian(&k, 1.0)
    }

    fn static_propagator(&self, duration: f64) -> Result<CMat> {
        let h = self.hamiltonian_at(0.0);
        expm_hermitian(&h, 2.0 * std::f64::consts::PI * duration)
    }

    fn inner_propagate(&self, t0: f64, duration: f64, step: f64) -> Result<CMat> {
        if self.terms.is_empty() || duration == 0.0 {
            return Ok(CMat::identity(self.dim, self.dim));
        }
        if self.is_static() {
            return self.static_propagator(duration);
        }
        let n = (duration / step).ceil().max(1.0) as usize;
        let h = duration / n as f64;
        let mut u = CMat::identity(self.dim, self.dim);
        for k in 0..n {
            u = self.magnus_step(t0 + k as f64 * h, h)? * u;
        }
        Ok(u)
    }

    /// Converts a dressed-frame propagator over [t0, t1] to the H₀ frame.
    fn undress(&self, t0: f64, t1: f64, u: CMat) -> CMat {
        match &self.dressing {
            None => u,
            Some(d) => d.at(t1) * u * d.at(t0).adjoint(),
        }
    }

    /// Interaction-frame propagator over [t0, t0 + duration].
    pub fn propagate(&self, t0: f64, duration: f64, step: f64) -> Result<CMat> {
        if !(duration >= 0.0) {
            return invalid("duration must be non-negative");
        }
        if self.is_empty() || duration == 0.0 {
            return Ok(CMat::identity(self.dim, self.dim));
        }
        self.check_step(step)?;
        let u = self.inner_propagate(t0, duration, step)?;
        Ok(self.undress(t0, t0 + duration, u))
    }

    /// Propagators from 0 to each of the ascending `times`.
    pub fn propagators_at(&self, times: &[f64], step: f64) -> Result<Vec<CMat>> {
        if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| !(*t >= 0.0)) {
            return invalid("times must be non-negative and ascending");
        }
        if self.is_empty() {
            return Ok(vec![CMat::identity(self.dim, self.dim); times.len()]);
        }
        self.check_step(step)?;
        if self.is_static() {
            let (vals, vecs) = eigh(&self.hamiltonian_at(0.0))?;
            return Ok(times
                .iter()
                .map(|&t| self.undress(0.0, t, expm_from_eigh(&vals, &vecs, 2.0 * std::f64::consts::PI * t)))
                .collect());
        }
        let mut out = Vec::with_capacity(times.len());
        let mut u = CMat::identity(self.dim, self.dim);
        let mut t_prev = 0.0;
        for &t in times {
            u = self.inner_propagate(t_prev, t - t_prev, step)? * u;
            out.push(self.undress(0.0, t, u.clone()));
            t_prev = t;
        }
        Ok(out)
    }
}

/// Free evolution e^{−iH₀t} in the eigenbasis.
pub fn free_propagator(levels: &LevelSet, duration: f64) -> CMat {
    let n = levels.dim();
    let mut d = CMat::zeros(n, n);
    for (k, e) in levels.energies.iter().enumerate() {
        d[(k, k)] = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * e * 1e6 * duration);
    }
    d
}

/// Lab-frame propagator (eigenbasis) for a drive pulse of `duration`.
pub fn pulse_propagator(levels: &LevelSet, drive: &Drive, duration: f64, step: f64, window: RwaWindow) -> Result<CMat> {
    let frame = InteractionFrame::new(levels, drive, window);
    Ok(free_propagator(levels, duration) * frame.propagate(0.0, duration, step)?)
}

/// Evolve `state` under H₀ + δH(t) for `duration` seconds.
pub fn evolve(
    levels: &LevelSet,
    drive: &Drive,
    state: &DensityState,
    duration: f64,
    step: f64,
    window: RwaWindow,
) -> Result<DensityState> {
    let u = pulse_propagator(levels, drive, duration, step, window)?;
    let rho_e = state.in_eigenbasis(levels);
    let out = &u * rho_e * u.adjoint();
    let rho = levels.from_eigenbasis(&out);
    let trace = rho.trace().re;
    if (trace - state.trace()).abs() > 1e-9 {
        return Err(Error::Numerical(format!("trace drifted to {trace}")));
    }
    Ok(DensityState { rho })
}

/// Largest step the integrator accepts for this drive.
pub fn max_step(levels: &LevelSet, drive: &Drive, window: RwaWindow) -> f64 {
    InteractionFrame::new(levels, drive, window).max_step()
}
