use rayon::prelude::*;

use super::drive::{magnetic_drive, zeeman_operator, Drive};
use super::output::{RabiMap, SpectrumResult};
use super::propagate::{free_propagator, max_step, pulse_propagator, InteractionFrame, RwaWindow};
use super::pulses::{selective_pulse, Channel, Element, PulseSequence, Readout};
use super::state::boltzmann_populations;
use crate::constants::SPEED_OF_LIGHT;
use crate::error::{invalid, Error, Result};
use crate::linalg::{c, CMat, Vec3};
use crate::spincore::{levels, transition_table, LevelSet, Probe, SpinSystem, StaticField, TransitionClass};
use crate::starkdrive::{harmonic_components, DriveModel};

/// Largest number of step halvings tried when converging a signal.
const MAX_REFINEMENTS: usize = 8;
/// Absolute signal change accepted between successive step halvings.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-3;

/// Relative local field strengths at one point of the sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldScales {
    pub b1: f64,
    pub e2: f64,
    pub b2: f64,
}

impl Default for FieldScales {
    fn default() -> Self {
        FieldScales { b1: 1.0, e2: 1.0, b2: 1.0 }
    }
}

/// Residual RF magnetic field accompanying an electric drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticLeak {
    /// Magnetic amplitude (T) per V/m of electric amplitude.
    pub tesla_per_v_per_m: f64,
    pub direction: Vec3,
}

impl MagneticLeak {
    /// Leak of a travelling-wave field suppressed by `fraction` on a line of
    /// effective permittivity `eps_eff`: B = fraction · E·√ε/c.
    pub fn from_fraction(fraction: f64, eps_eff: f64) -> Self {
        MagneticLeak { tesla_per_v_per_m: fraction * eps_eff.sqrt() / SPEED_OF_LIGHT, direction: Vec3::x() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RfChannel {
    /// Oscillating magnetic field along `direction`; amplitudes in T.
    Magnetic { direction: Vec3 },
    /// Electric field acting through the Stark model; amplitudes in V/m.
    Electric { model: DriveModel, leak: Option<MagneticLeak> },
}

impl RfChannel {
    pub fn magnetic() -> Self {
        RfChannel::Magnetic { direction: Vec3::x() }
    }

    pub fn electric(model: DriveModel) -> Self {
        RfChannel::Electric { model, leak: None }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RfChannel::Magnetic { .. } => "magnetic",
            RfChannel::Electric { .. } => "electric",
        }
    }
}

/// Which ESR line(s) the Davies readout is taken on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadoutLine {
    /// k-th ESR line in order of increasing frequency.
    Index(usize),
    /// Mean contrast over every ESR line.
    All,
}

#[derive(Debug, Clone)]
pub struct DaviesSetup {
    pub system: SpinSystem,
    pub field: StaticField,
    pub channel: RfChannel,
    pub readout: ReadoutLine,
    /// Spin temperature (K).
    pub temperature: f64,
    pub window: RwaWindow,
}

impl DaviesSetup {
    pub fn new(system: SpinSystem, field: StaticField, channel: RfChannel) -> Self {
        DaviesSetup { system, field, channel, readout: ReadoutLine::All, temperature: 1.9, window: RwaWindow::default() }
    }

    pub fn with_readout(mut self, readout: ReadoutLine) -> Self {
        self.readout = readout;
        self
    }
}

/// ESR level pairs (lower level first) ordered by frequency.
pub fn esr_lines(levels: &LevelSet) -> Result<Vec<(usize, usize)>> {
    let mut t: Vec<_> = transition_table(levels, &Probe::Sx)?
        .into_iter()
        .filter(|t| t.class == TransitionClass::Esr)
        .collect();
    t.sort_by(|a, b| a.frequency.abs().total_cmp(&b.frequency.abs()));
    Ok(t.iter()
        .map(|t| {
            let (i, j) = t.level_pair;
            if levels.energies[i] <= levels.energies[j] { (i, j) } else { (j, i) }
        })
        .collect())
}

/// A prepared Davies ENDOR experiment: levels, thermal populations and the
/// probed ESR lines are computed once.
#[derive(Debug, Clone)]
pub struct Davies {
    pub setup: DaviesSetup,
    pub levels: LevelSet,
    pub lines: Vec<(usize, usize)>,
    thermal: Vec<f64>,
}

impl Davies {
    pub fn new(setup: DaviesSetup) -> Result<Self> {
        if !(setup.temperature > 0.0) {
            return invalid("temperature must be positive");
        }
        let levels = levels(&setup.system, &setup.field)?;
        let all = esr_lines(&levels)?;
        let lines = match setup.readout {
            ReadoutLine::All => all,
            ReadoutLine::Index(k) => match all.get(k) {
                Some(p) => vec![*p],
                None => {
                    return Err(Error::NotFound(format!("ESR line {k} (system has {} lines)", all.len())));
                }
            },
        };
        if lines.is_empty() {
            return Err(Error::NotFound("no ESR line at this field".into()));
        }
        let thermal = boltzmann_populations(&levels.energies, setup.temperature);
        Ok(Davies { setup, levels, lines, thermal })
    }

    /// RF drive for one carrier and amplitude at a point with `scales`.
    pub fn rf_drive(&self, carrier: f64, amplitude: f64, scales: FieldScales) -> Result<Drive> {
        if !(amplitude >= 0.0) {
            return invalid("RF amplitude must be non-negative");
        }
        let sys = &self.setup.system;
        let field = &self.setup.field;
        match &self.setup.channel {
            RfChannel::Magnetic { direction } => magnetic_drive(sys, &(direction * (amplitude * scales.b2)), carrier),
            RfChannel::Electric { model, leak } => {
                let h = harmonic_components(model, sys, field, amplitude * scales.e2, carrier)?;
                let mut drive = Drive::from(&h);
                if let Some(l) = leak {
                    let b = l.direction * (l.tesla_per_v_per_m * amplitude * scales.b2);
                    drive = drive.with(magnetic_drive(sys, &b, carrier)?);
                }
                Ok(drive)
            }
        }
    }

    fn thermal_matrix(&self) -> CMat {
        let n = self.levels.dim();
        let mut m = CMat::zeros(n, n);
        for (k, p) in self.thermal.iter().enumerate() {
            m[(k, k)] = c(*p);
        }
        m
    }

    /// Contrast trace (d − d_off)/d₀ at each RF pulse length in `durations`.
    pub fn trace(&self, carrier: f64, amplitude: f64, durations: &[f64], scales: FieldScales) -> Result<Vec<f64>> {
        let drive = self.rf_drive(carrier, amplitude, scales)?;
        let frame = InteractionFrame::new(&self.levels, &drive, self.setup.window);
        let thermal = self.thermal_matrix();
        let mut prepared = Vec::with_capacity(self.lines.len());
        for &pair in &self.lines {
            let readout = Readout { pair };
            let u = selective_pulse(&self.levels, pair, std::f64::consts::PI * scales.b1, 0.0)?;
            let rho = &u * &thermal * u.adjoint();
            let d0 = readout.signal(&self.levels, &thermal);
            let d_off = readout.signal(&self.levels, &rho);
            prepared.push((rho, readout, d_off, d0));
        }
        let evaluate = |step: f64| -> Result<Vec<f64>> {
            let us = frame.propagators_at(durations, step)?;
            Ok(us
                .iter()
                .map(|u| {
                    let sum: f64 = prepared
                        .iter()
                        .map(|(rho, readout, d_off, d0)| {
                            let out = u * rho * u.adjoint();
                            (readout.signal(&self.levels, &out) - d_off) / d0
                        })
                        .sum();
                    sum / prepared.len() as f64
                })
                .collect())
        };
        let mut step = frame.max_step();
        if frame.is_empty() || frame.is_static() {
            return evaluate(step);
        }
        let mut prev = evaluate(step)?;
        for _ in 0..MAX_REFINEMENTS {
            step *= 0.5;
            let cur = evaluate(step)?;
            let change = prev.iter().zip(&cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if change < CONVERGENCE_TOLERANCE {
                return Ok(cur);
            }
            prev = cur;
        }
        Err(Error::Numerical(format!("signal did not converge after {MAX_REFINEMENTS} step halvings")))
    }

    pub fn signal(&self, carrier: f64, amplitude: f64, duration: f64, scales: FieldScales) -> Result<f64> {
        Ok(self.trace(carrier, amplitude, &[duration], scales)?[0])
    }

    /// Thermal populations as an eigenbasis density matrix.
    pub fn thermal_eigen(&self) -> CMat {
        self.thermal_matrix()
    }

    /// Eigenbasis propagator of one sequence element.
    pub fn element_propagator(&self, element: &Element, scales: FieldScales) -> Result<CMat> {
        let sys = &self.setup.system;
        let p = match element {
            Element::Delay(t) => return Ok(free_propagator(&self.levels, *t)),
            Element::Pulse(p) => p,
        };
        match p.channel {
            Channel::MicrowaveB1 => {
                let pair = self.nearest_esr_line(p.carrier)?;
                let v = self.levels.to_eigenbasis(&zeeman_operator(sys, &(Vec3::x() * p.amplitude)));
                let omega = v[(pair.0, pair.1)].norm() * 1e6;
                let angle = 2.0 * std::f64::consts::PI * omega * p.duration * scales.b1;
                let rot = selective_pulse(&self.levels, pair, angle, p.phase)?;
                Ok(free_propagator(&self.levels, p.duration) * rot)
            }
            Channel::RfB2 => {
                let mut drive = magnetic_drive(sys, &(Vec3::x() * (p.amplitude * scales.b2)), p.carrier)?;
                drive.phase = p.phase;
                let step = max_step(&self.levels, &drive, self.setup.window);
                pulse_propagator(&self.levels, &drive, p.duration, step, self.setup.window)
            }
            Channel::RfE2 => {
                let RfChannel::Electric { .. } = &self.setup.channel else {
                    return invalid("electric RF pulse needs an electric drive model");
                };
                let mut drive = self.rf_drive(p.carrier, p.amplitude, scales)?;
                drive.phase = p.phase;
                let step = max_step(&self.levels, &drive, self.setup.window);
                pulse_propagator(&self.levels, &drive, p.duration, step, self.setup.window)
            }
        }
    }

    fn nearest_esr_line(&self, carrier: f64) -> Result<(usize, usize)> {
        esr_lines(&self.levels)?
            .into_iter()
            .min_by(|a, b| {
                let da = (self.levels.gap(a.0, a.1).abs() * 1e6 - carrier).abs();
                let db = (self.levels.gap(b.0, b.1).abs() * 1e6 - carrier).abs();
                da.total_cmp(&db)
            })
            .ok_or_else(|| Error::NotFound("no ESR line for microwave pulse".into()))
    }

    /// Runs `seq` from the eigenbasis state `rho` and returns the readout
    /// population difference.
    pub fn run_sequence_from(&self, rho: &CMat, seq: &PulseSequence, scales: FieldScales) -> Result<f64> {
        let mut r = rho.clone();
        for e in &seq.elements {
            let u = self.element_propagator(e, scales)?;
            r = &u * r * u.adjoint();
        }
        Ok(seq.readout.signal(&self.levels, &r))
    }

    /// Runs `seq` from thermal equilibrium.
    pub fn run_sequence(&self, seq: &PulseSequence, scales: FieldScales) -> Result<f64> {
        self.run_sequence_from(&self.thermal_matrix(), seq, scales)
    }

    fn metadata(&self) -> Vec<(String, String)> {
        vec![
            ("species".into(), self.setup.system.label.clone()),
            ("b0_t".into(), format!("{}", self.setup.field.magnitude())),
            ("channel".into(), self.setup.channel.name().into()),
            ("temperature_k".into(), format!("{}", self.setup.temperature)),
            (
                "readout".into(),
                match self.setup.readout {
                    ReadoutLine::All => "all".into(),
                    ReadoutLine::Index(k) => k.to_string(),
                },
            ),
        ]
    }
}

/// Davies ENDOR contrast versus RF frequency, clamped to [0, 1].
pub fn davies_endor_spectrum(setup: &DaviesSetup, rf_grid: &[f64], rf_duration: f64, rf_amplitude: f64) -> Result<SpectrumResult> {
    if rf_grid.is_empty() {
        return invalid("RF grid is empty");
    }
    if !(rf_duration > 0.0) {
        return invalid("RF pulse duration must be positive");
    }
    let davies = Davies::new(setup.clone())?;
    let signal = rf_grid
        .par_iter()
        .map(|&f| davies.signal(f, rf_amplitude, rf_duration, FieldScales::default()).map(|s| s.clamp(0.0, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    let mut metadata = davies.metadata();
    metadata.push(("rf_duration_s".into(), format!("{rf_duration}")));
    metadata.push(("rf_amplitude".into(), format!("{rf_amplitude}")));
    metadata.push(("grid".into(), format!("{} points {}..{} Hz", rf_grid.len(), rf_grid[0], rf_grid[rf_grid.len() - 1])));
    Ok(SpectrumResult { metadata, axis: rf_grid.to_vec(), signal })
}

/// Davies contrast on a duration × amplitude grid at a fixed carrier.
pub fn rabi_map(setup: &DaviesSetup, carrier: f64, durations: &[f64], amplitudes: &[f64]) -> Result<RabiMap> {
    if durations.is_empty() || amplitudes.is_empty() {
        return invalid("Rabi map axes must be non-empty");
    }
    let davies = Davies::new(setup.clone())?;
    let columns = amplitudes
        .par_iter()
        .map(|&a| davies.trace(carrier, a, durations, FieldScales::default()))
        .collect::<Result<Vec<_>>>()?;
    let signal = (0..durations.len())
        .map(|r| columns.iter().map(|col| col[r].clamp(0.0, 1.0)).collect())
        .collect();
    let mut metadata = davies.metadata();
    metadata.push(("carrier_hz".into(), format!("{carrier}")));
    Ok(RabiMap { metadata, durations: durations.to_vec(), amplitudes: amplitudes.to_vec(), signal })
}

/// Nominal two-pulse echo timing: θ₁ – τ – θ₂.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HahnTemplate {
    pub first_angle: f64,
    pub second_angle: f64,
    pub tau: f64,
}

impl Default for HahnTemplate {
    fn default() -> Self {
        HahnTemplate { first_angle: std::f64::consts::FRAC_PI_2, second_angle: std::f64::consts::PI, tau: 1e-6 }
    }
}

/// Echo amplitude versus B₁ scale, normalized to the ideal echo.
///
/// The first pulse creates coherence |ρ_ij|; the refocusing pulse transfers
/// the fraction sin²(θ₂/2) of it into the echo.
pub fn hahn_echo_power_sweep(
    levels: &LevelSet,
    pair: (usize, usize),
    b1_scales: &[f64],
    template: HahnTemplate,
    temperature: f64,
) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return invalid("temperature must be positive");
    }
    let pops = boltzmann_populations(&levels.energies, temperature);
    let n = levels.dim();
    let mut rho = CMat::zeros(n, n);
    for (k, p) in pops.iter().enumerate() {
        rho[(k, k)] = c(*p);
    }
    let ideal = 0.5 * (pops[pair.0] - pops[pair.1]).abs();
    if ideal == 0.0 {
        return invalid("ESR pair has no polarization");
    }
    let free = free_propagator(levels, template.tau);
    b1_scales
        .iter()
        .map(|&s| {
            let u1 = selective_pulse(levels, pair, template.first_angle * s, 0.0)?;
            let r = &free * (&u1 * &rho * u1.adjoint()) * free.adjoint();
            let transfer = (0.5 * template.second_angle * s).sin().powi(2);
            Ok(r[(pair.0, pair.1)].norm() * transfer / ideal)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spincore::species;
    use crate::starkdrive::{builtin_model, rabi_rate};

    fn p_setup(channel: RfChannel) -> DaviesSetup {
        DaviesSetup::new(species::builtin("P").unwrap(), StaticField::along_z(0.25), channel)
    }

    fn sqt(levels: &LevelSet) -> Vec<(usize, usize, f64)> {
        transition_table(levels, &Probe::Ix)
            .unwrap()
            .into_iter()
            .filter(|t| t.class == TransitionClass::NmrSqt)
            .map(|t| (t.level_pair.0, t.level_pair.1, t.frequency.abs() * 1e6))
            .collect()
    }

    #[test]
    fn echo_sweep_peaks_at_nominal() {
        let d = Davies::new(p_setup(RfChannel::magnetic())).unwrap();
        let scales: Vec<f64> = (0..=40).map(|k| k as f64 * 0.05).collect();
        let curve = hahn_echo_power_sweep(&d.levels, d.lines[0], &scales, HahnTemplate::default(), 1.9).unwrap();
        let imax = (0..curve.len()).max_by(|&a, &b| curve[a].total_cmp(&curve[b])).unwrap();
        assert!((scales[imax] - 1.0).abs() < 1e-12);
        assert!((curve[imax] - 1.0).abs() < 1e-9);
        assert!(curve[40] < 1e-9);
        for (s, v) in scales.iter().zip(&curve) {
            assert!((v - (std::f64::consts::FRAC_PI_2 * s).sin().abs().powi(3)).abs() < 1e-9);
        }
        let other = HahnTemplate { tau: 7.3e-6, ..HahnTemplate::default() };
        let curve2 = hahn_echo_power_sweep(&d.levels, d.lines[0], &scales, other, 1.9).unwrap();
        for (a, b) in curve.iter().zip(&curve2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn magnetic_endor_inverts_at_pi() {
        let b2 = 1e-4;
        let d = Davies::new(p_setup(RfChannel::magnetic()).with_readout(ReadoutLine::Index(0))).unwrap();
        let (i, j, f) = sqt(&d.levels)[0];
        let drive = d.rf_drive(f, b2, FieldScales::default()).unwrap();
        let omega = d.levels.to_eigenbasis(&drive.components[0].operator)[(i, j)].norm() * 1e6;
        let s = d.signal(f, b2, 0.5 / omega, FieldScales::default()).unwrap();
        let touches = d.lines[0].0 == i || d.lines[0].0 == j || d.lines[0].1 == i || d.lines[0].1 == j;
        if touches {
            assert!(s > 0.99, "contrast {s}");
        } else {
            assert!(s.abs() < 1e-3);
        }
        let s0 = d.signal(f, 0.0, 0.5 / omega, FieldScales::default()).unwrap();
        assert!(s0.abs() < 1e-12);
    }

    #[test]
    fn sequence_matches_davies_and_is_linear() {
        let b2 = 1e-4;
        let d = Davies::new(p_setup(RfChannel::magnetic()).with_readout(ReadoutLine::Index(1))).unwrap();
        let line = d.lines[0];
        let (i, j, f) = sqt(&d.levels).into_iter().find(|t| t.0 == line.1 || t.1 == line.1).unwrap();
        let omega = d.levels.to_eigenbasis(&zeeman_operator(&d.setup.system, &(Vec3::x() * b2)))[(i, j)].norm() * 1e6;
        let f_esr = d.levels.gap(line.0, line.1).abs() * 1e6;
        let b1 = 1e-5;
        let w_esr = d.levels.to_eigenbasis(&zeeman_operator(&d.setup.system, &(Vec3::x() * b1)))[line].norm() * 1e6;
        let t_rf = 0.3 / omega;
        let seq = PulseSequence::new(
            vec![
                Element::Pulse(crate::dynamics::Pulse::new(Channel::MicrowaveB1, f_esr, b1, 0.0, 0.5 / w_esr).unwrap()),
                Element::Pulse(crate::dynamics::Pulse::new(Channel::RfB2, f, b2, 0.0, t_rf).unwrap()),
                Element::Delay(1e-6),
            ],
            Readout { pair: line },
        )
        .unwrap();
        let raw = d.run_sequence(&seq, FieldScales::default()).unwrap();
        let th = d.thermal_eigen();
        let d0 = th[(line.0, line.0)].re - th[(line.1, line.1)].re;
        let contrast = d.signal(f, b2, t_rf, FieldScales::default()).unwrap();
        assert!(((raw + d0) / d0 - contrast).abs() < 2e-3, "{raw} {contrast}");

        let n = d.levels.dim();
        let basis = |k: usize| {
            let mut m = CMat::zeros(n, n);
            m[(k, k)] = c(1.0);
            m
        };
        let weights = [0.1, 0.2, 0.3, 0.4];
        let mixed = (0..n).fold(CMat::zeros(n, n), |acc, k| acc + basis(k) * c(weights[k]));
        let whole = d.run_sequence_from(&mixed, &seq, FieldScales::default()).unwrap();
        let parts: f64 = (0..n).map(|k| weights[k] * d.run_sequence_from(&basis(k), &seq, FieldScales::default()).unwrap()).sum();
        assert!((whole - parts).abs() < 1e-12);
    }

    #[test]
    fn rabi_map_zero_row_is_flat_and_rate_matches() {
        let model = builtin_model("P").unwrap();
        let setup = p_setup(RfChannel::electric(model.clone()));
        let d = Davies::new(setup.clone()).unwrap();
        let (i, j, f) = sqt(&d.levels)[0];
        let e = 1.2e5;
        let h = harmonic_components(&model, &setup.system, &setup.field, e, f / 2.0).unwrap();
        let omega = rabi_rate(&d.levels, &h, (i, j), 2, None).unwrap();
        let durations: Vec<f64> = (0..60).map(|k| k as f64 * 0.1 / omega).collect();
        let map = rabi_map(&setup, f / 2.0, &durations, &[0.0, e]).unwrap();
        assert!(map.signal.iter().all(|row| row[0] == 0.0));
        let col: Vec<f64> = map.signal.iter().map(|r| r[1]).collect();
        let fit = crate::dynamics::fit_rabi_frequency(&durations, &col).unwrap();
        assert!((fit / omega - 1.0).abs() < 0.03, "fit {fit} vs {omega}");
    }
}
