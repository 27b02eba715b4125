//! Transfer-matrix model of the coplanar photonic bandgap resonator.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::SPEED_OF_LIGHT;
use crate::error::{invalid, Error, Result};

/// 20·log₁₀(e): dB per neper.
const DB_PER_NEPER: f64 = 8.685_889_638_065_037;

pub type Abcd = Matrix2<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSection {
    pub impedance_ohm: f64,
    pub length_m: f64,
    pub eps_eff: f64,
    pub loss_db_per_m: f64,
}

impl LineSection {
    pub fn new(impedance_ohm: f64, length_m: f64, eps_eff: f64, loss_db_per_m: f64) -> Result<Self> {
        let s = LineSection { impedance_ohm, length_m, eps_eff, loss_db_per_m };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.impedance_ohm > 0.0) || !self.impedance_ohm.is_finite() {
            return invalid("section impedance must be positive");
        }
        if !(self.length_m >= 0.0) || !self.length_m.is_finite() {
            return invalid("section length must be non-negative");
        }
        if !(self.eps_eff >= 1.0) || !self.eps_eff.is_finite() {
            return invalid("effective permittivity must be at least 1");
        }
        if !(self.loss_db_per_m >= 0.0) || !self.loss_db_per_m.is_finite() {
            return invalid("loss must be non-negative");
        }
        Ok(())
    }

    /// Propagation constant γ = α + iβ (1/m).
    pub fn gamma(&self, f: f64) -> Complex64 {
        Complex64::new(
            self.loss_db_per_m / DB_PER_NEPER,
            2.0 * std::f64::consts::PI * f * self.eps_eff.sqrt() / SPEED_OF_LIGHT,
        )
    }
}

/// Chain matrix of one section at frequency `f` (Hz).
pub fn abcd(section: &LineSection, f: f64) -> Result<Abcd> {
    if !(f > 0.0) {
        return invalid("frequency must be positive");
    }
    let gl = section.gamma(f) * section.length_m;
    let (ch, sh) = (gl.cosh(), gl.sinh());
    let z = section.impedance_ohm;
    Ok(Abcd::new(ch, sh * z, sh / z, ch))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionNetwork {
    pub sections: Vec<LineSection>,
    pub port_impedance: f64,
}

/// Default port impedance (Ω).
pub const PORT_IMPEDANCE: f64 = 50.0;

/// Bragg mirror description: `periods` repetitions of a high/low pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BraggDesign {
    pub periods: usize,
    pub z_high: f64,
    pub z_low: f64,
    pub section_length: f64,
    pub cavity_impedance: f64,
    pub cavity_length: f64,
    pub eps_eff: f64,
    pub loss_db_per_m: f64,
}

impl BraggDesign {
    /// 5 periods of 95 Ω / 30 Ω, 4 mm sections, 6 mm cavity.
    pub fn reference() -> Self {
        BraggDesign {
            periods: 5,
            z_high: 95.0,
            z_low: 30.0,
            section_length: 4e-3,
            cavity_impedance: CAVITY_IMPEDANCE,
            cavity_length: 6e-3,
            eps_eff: REFERENCE_EPS_EFF,
            loss_db_per_m: 0.0,
        }
    }

    /// Mirror, cavity, mirror; the right mirror is the reverse of the left
    /// so the structure is symmetric.
    pub fn network(&self) -> Result<TransmissionNetwork> {
        let sec = |z: f64, l: f64| LineSection::new(z, l, self.eps_eff, self.loss_db_per_m);
        let mut left = Vec::with_capacity(2 * self.periods);
        for _ in 0..self.periods {
            left.push(sec(self.z_high, self.section_length)?);
            left.push(sec(self.z_low, self.section_length)?);
        }
        let mut sections = left.clone();
        sections.push(sec(self.cavity_impedance, self.cavity_length)?);
        sections.extend(left.into_iter().rev());
        TransmissionNetwork::new(sections, PORT_IMPEDANCE)
    }
}

/// Effective permittivity placing the quarter-wave frequency of 4 mm
/// sections at 6.75 GHz.
pub const REFERENCE_EPS_EFF: f64 = 7.72;

/// Impedance of the 6 mm cavity section (Ω).
pub const CAVITY_IMPEDANCE: f64 = 50.0;

impl TransmissionNetwork {
    pub fn new(sections: Vec<LineSection>, port_impedance: f64) -> Result<Self> {
        if sections.is_empty() {
            return invalid("network has no sections");
        }
        if !(port_impedance > 0.0) {
            return invalid("port impedance must be positive");
        }
        for s in &sections {
            s.validate()?;
        }
        Ok(TransmissionNetwork { sections, port_impedance })
    }

    pub fn reference_geometry() -> Self {
        BraggDesign::reference().network().expect("reference geometry is valid")
    }

    pub fn reversed(&self) -> Self {
        TransmissionNetwork { sections: self.sections.iter().rev().copied().collect(), port_impedance: self.port_impedance }
    }

    /// Same network with every section's loss set to `db_per_m`.
    pub fn with_loss(&self, db_per_m: f64) -> Result<Self> {
        let sections = self.sections.iter().map(|s| LineSection { loss_db_per_m: db_per_m, ..*s }).collect();
        Self::new(sections, self.port_impedance)
    }

    pub fn cascade(&self, f: f64) -> Result<Abcd> {
        let mut m = Abcd::identity();
        for s in &self.sections {
            m *= abcd(s, f)?;
        }
        Ok(m)
    }

    pub fn total_length(&self) -> f64 {
        self.sections.iter().map(|s| s.length_m).sum()
    }

    /// Reads `impedance_ohm,length_m,eps_eff,loss_db_per_m` rows; a comment
    /// line `# port_impedance_ohm: Z` sets the port impedance.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut port = PORT_IMPEDANCE;
        let mut body = String::new();
        for line in r.lines() {
            let line = line?;
            if let Some(rest) = line.trim().strip_prefix('#') {
                if let Some((k, v)) = rest.split_once(':') {
                    if k.trim() == "port_impedance_ohm" {
                        port = v.trim().parse().map_err(|_| Error::Parse(format!("bad port impedance {v:?}")))?;
                    }
                }
            } else if !line.trim().is_empty() {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
        let sections = rd.deserialize().collect::<std::result::Result<Vec<LineSection>, _>>()?;
        Self::new(sections, port)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# port_impedance_ohm: {}", self.port_impedance)?;
        let mut out = csv::Writer::from_writer(w);
        for s in &self.sections {
            out.serialize(s)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn denominator(m: &Abcd, z0: f64) -> Complex64 {
    m[(0, 0)] + m[(0, 1)] / z0 + m[(1, 0)] * z0 + m[(1, 1)]
}

pub fn s21(network: &TransmissionNetwork, f: f64) -> Result<Complex64> {
    let m = network.cascade(f)?;
    Ok(Complex64::new(2.0, 0.0) / denominator(&m, network.port_impedance))
}

pub fn s11(network: &TransmissionNetwork, f: f64) -> Result<Complex64> {
    let m = network.cascade(f)?;
    let z0 = network.port_impedance;
    Ok((m[(0, 0)] + m[(0, 1)] / z0 - m[(1, 0)] * z0 - m[(1, 1)]) / denominator(&m, z0))
}

/// Transmission versus frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct S21Spectrum {
    pub f_hz: Vec<f64>,
    pub s21_db: Vec<f64>,
    pub s21_phase_rad: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SpectrumRow {
    f_hz: f64,
    s21_db: f64,
    s21_phase_rad: f64,
}

impl S21Spectrum {
    pub fn len(&self) -> usize {
        self.f_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f_hz.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for k in 0..self.len() {
            out.serialize(SpectrumRow { f_hz: self.f_hz[k], s21_db: self.s21_db[k], s21_phase_rad: self.s21_phase_rad[k] })?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
        let rows = rd.deserialize().collect::<std::result::Result<Vec<SpectrumRow>, _>>()?;
        Ok(S21Spectrum {
            f_hz: rows.iter().map(|r| r.f_hz).collect(),
            s21_db: rows.iter().map(|r| r.s21_db).collect(),
            s21_phase_rad: rows.iter().map(|r| r.s21_phase_rad).collect(),
        })
    }
}

fn check_grid(f_grid: &[f64]) -> Result<()> {
    if f_grid.is_empty() {
        return invalid("frequency grid is empty");
    }
    if f_grid[0] <= 0.0 || f_grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("frequency grid must be positive and strictly ascending");
    }
    Ok(())
}

pub fn sweep_s21(network: &TransmissionNetwork, f_grid: &[f64]) -> Result<S21Spectrum> {
    check_grid(f_grid)?;
    let vals = f_grid.par_iter().map(|&f| s21(network, f)).collect::<Result<Vec<_>>>()?;
    Ok(S21Spectrum {
        f_hz: f_grid.to_vec(),
        s21_db: vals.iter().map(|s| 20.0 * s.norm().log10()).collect(),
        s21_phase_rad: vals.iter().map(|s| s.arg()).collect(),
    })
}

/// Length of a quarter-wave section at `f_center` (m).
pub fn quarter_wave_design(f_center: f64, eps_eff: f64) -> Result<f64> {
    if !(f_center > 0.0) || !(eps_eff > 0.0) {
        return invalid("frequency and permittivity must be positive");
    }
    Ok(SPEED_OF_LIGHT / (4.0 * f_center * eps_eff.sqrt()))
}

/// Fractional width Δf/f₀ of the first stop band of a quarter-wave stack.
pub fn quarter_wave_gap_fraction(z1: f64, z2: f64) -> f64 {
    4.0 / std::f64::consts::PI * ((z1 - z2).abs() / (z1 + z2)).asin()
}

/// Half-wave frequency of an isolated section (Hz).
pub fn half_wave_frequency(section: &LineSection) -> f64 {
    SPEED_OF_LIGHT / (2.0 * section.length_m * section.eps_eff.sqrt())
}

fn crossing(f: &[f64], y: &[f64], k: usize, threshold: f64) -> f64 {
    // Linear interpolation between samples k and k+1.
    let t = (threshold - y[k]) / (y[k + 1] - y[k]);
    f[k] + t * (f[k + 1] - f[k])
}

/// Edges of the stop band: the contiguous region below `threshold_db` around
/// the deepest attenuation, bridged across narrow transmission windows such
/// as the defect mode.
pub fn bandgap_edges(spectrum: &S21Spectrum, threshold_db: f64) -> Result<(f64, f64)> {
    let (f, y) = (&spectrum.f_hz, &spectrum.s21_db);
    if f.len() < 3 {
        return invalid("spectrum too short");
    }
    let below: Vec<bool> = y.iter().map(|v| *v < threshold_db).collect();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    while k < below.len() {
        if below[k] {
            let start = k;
            while k < below.len() && below[k] {
                k += 1;
            }
            runs.push((start, k - 1));
        } else {
            k += 1;
        }
    }
    let deepest = (0..y.len()).min_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
    let Some(mut idx) = runs.iter().position(|&(a, b)| a <= deepest && deepest <= b) else {
        return Err(Error::NotFound(format!("no stop band below {threshold_db} dB")));
    };
    let (mut lo, mut hi) = runs[idx];
    let width = |a: usize, b: usize| f[b] - f[a];
    let mut merged = true;
    while merged {
        merged = false;
        if idx + 1 < runs.len() {
            let (a, b) = runs[idx + 1];
            if width(hi, a) < 0.05 * width(lo, hi).max(width(a, b)) {
                hi = b;
                runs[idx] = (lo, hi);
                runs.remove(idx + 1);
                merged = true;
            }
        }
        if idx > 0 {
            let (a, b) = runs[idx - 1];
            if width(b, lo) < 0.05 * width(lo, hi).max(width(a, b)) {
                lo = a;
                runs[idx - 1] = (lo, hi);
                runs.remove(idx);
                idx -= 1;
                merged = true;
            }
        }
    }
    let f_low = if lo == 0 { f[0] } else { crossing(f, y, lo - 1, threshold_db) };
    let f_high = if hi + 1 == f.len() { f[hi] } else { crossing(f, y, hi, threshold_db) };
    Ok((f_low, f_high))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceFit {
    pub f0: f64,
    /// f₀ over the fitted Lorentzian FWHM.
    pub loaded_q: f64,
    /// f₀ over the width between half-power crossings of the data.
    pub q_3db: f64,
    /// −20 log₁₀ |S21| at the peak.
    pub insertion_loss_db: f64,
}

fn lorentzian(p: &[f64; 4], f: f64) -> f64 {
    let x = 2.0 * (f - p[1]) / p[2];
    p[0] / (1.0 + x * x) + p[3]
}

/// Lorentzian fit of |S21|² over a window holding a single peak.
pub fn resonance_fit(spectrum: &S21Spectrum) -> Result<ResonanceFit> {
    let f = &spectrum.f_hz;
    let n = f.len();
    if n < 7 {
        return Err(Error::FitFailure("window too short for a resonance fit".into()));
    }
    let p: Vec<f64> = spectrum.s21_db.iter().map(|d| 10f64.powf(d / 10.0)).collect();
    let k = (0..n).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
    let floor = p.iter().cloned().fold(f64::INFINITY, f64::min);
    let half = floor + 0.5 * (p[k] - floor);
    let peaks = (1..n - 1).filter(|&j| p[j] > half && p[j] > p[j - 1] && p[j] >= p[j + 1]).count();
    if peaks != 1 || k == 0 || k == n - 1 {
        return Err(Error::FitFailure(format!("expected one interior peak in the window, found {peaks}")));
    }
    let left = (0..k).rev().find(|&j| p[j] < half);
    let right = (k + 1..n).find(|&j| p[j] < half);
    let (Some(l), Some(r)) = (left, right) else {
        return Err(Error::FitFailure("peak is not resolved inside the window".into()));
    };
    let fl = crossing(f, &p, l, half);
    let fr = crossing(f, &p, r - 1, half);
    let fwhm0 = fr - fl;
    let q_3db = f[k] / fwhm0;

    // Gauss-Newton with step halving on (amplitude, f0, width, baseline),
    // frequencies measured from the peak sample in units of the width.
    let scale = fwhm0;
    let x: Vec<f64> = f.iter().map(|v| (v - f[k]) / scale).collect();
    let mut q = [p[k] - floor, 0.0, 1.0, floor];
    let cost = |q: &[f64; 4]| x.iter().zip(&p).map(|(xi, yi)| (lorentzian(q, *xi) - yi).powi(2)).sum::<f64>();
    let mut c0 = cost(&q);
    for _ in 0..200 {
        let jac = DMatrix::from_fn(n, 4, |i, j| {
            let u = 2.0 * (x[i] - q[1]) / q[2];
            let d = 1.0 + u * u;
            match j {
                0 => 1.0 / d,
                1 => q[0] * 2.0 * u * (2.0 / q[2]) / (d * d),
                2 => q[0] * 2.0 * u * u / q[2] / (d * d),
                _ => 1.0,
            }
        });
        let res = DVector::from_fn(n, |i, _| p[i] - lorentzian(&q, x[i]));
        let Ok(step) = jac.clone().svd(true, true).solve(&res, 1e-14) else {
            break;
        };
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1e-6 {
            let trial = [q[0] + lambda * step[0], q[1] + lambda * step[1], q[2] + lambda * step[2], q[3] + lambda * step[3]];
            let ct = cost(&trial);
            if trial[2] > 0.0 && ct < c0 {
                let done = (c0 - ct) <= 1e-15 * c0.max(1e-300);
                q = trial;
                c0 = ct;
                improved = !done;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let f0 = f[k] + q[1] * scale;
    let fwhm = q[2].abs() * scale;
    if !(fwhm > 0.0) || !f0.is_finite() || f0 < f[0] || f0 > f[n - 1] {
        return Err(Error::FitFailure("Lorentzian fit left the window".into()));
    }
    let peak = lorentzian(&q, q[1]);
    Ok(ResonanceFit { f0, loaded_q: f0 / fwhm, q_3db, insertion_loss_db: -10.0 * peak.max(1e-300).log10() })
}

fn power(network: &TransmissionNetwork, f: f64) -> Result<f64> {
    Ok(s21(network, f)?.norm_sqr())
}

/// Locates the strongest transmission peak in [f_low, f_high] and fits it.
///
/// The peak is bracketed on a coarse grid, refined by golden-section search
/// on the network, and fitted on a window of ±20 linewidths; the window is
/// rebuilt once from the fitted width.
pub fn find_resonance(network: &TransmissionNetwork, f_low: f64, f_high: f64) -> Result<ResonanceFit> {
    if !(f_low > 0.0) || !(f_high > f_low) {
        return invalid("search window must be positive and ordered");
    }
    let n = 20001;
    let grid: Vec<f64> = (0..n).map(|k| f_low + (f_high - f_low) * k as f64 / (n - 1) as f64).collect();
    let vals = grid.par_iter().map(|&f| power(network, f)).collect::<Result<Vec<_>>>()?;
    let k = (0..n).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(n - 1)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
    let (mut p1, mut p2) = (power(network, x1)?, power(network, x2)?);
    for _ in 0..200 {
        if p1 > p2 {
            b = x2;
            x2 = x1;
            p2 = p1;
            x1 = b - g * (b - a);
            p1 = power(network, x1)?;
        } else {
            a = x1;
            x1 = x2;
            p1 = p2;
            x2 = a + g * (b - a);
            p2 = power(network, x2)?;
        }
        if b - a < 1e-13 * b {
            break;
        }
    }
    let fpk = 0.5 * (a + b);
    let ppk = power(network, fpk)?;
    // Half-power points by bisection on each side.
    let half_point = |dir: f64| -> Result<f64> {
        let mut step = (f_high - f_low) / (n - 1) as f64 * 1e-3;
        let mut inner = fpk;
        let mut outer = fpk + dir * step;
        while power(network, outer)? > 0.5 * ppk {
            inner = outer;
            step *= 2.0;
            outer = fpk + dir * step;
            if outer <= f_low || outer >= f_high {
                return Err(Error::FitFailure("resonance wider than the search window".into()));
            }
        }
        for _ in 0..100 {
            let mid = 0.5 * (inner + outer);
            if power(network, mid)? > 0.5 * ppk {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        Ok(0.5 * (inner + outer))
    };
    let mut width = half_point(1.0)? - half_point(-1.0)?;
    let mut center = fpk;
    let mut fit = None;
    for _ in 0..2 {
        let lo = (center - 20.0 * width).max(f_low);
        let hi = (center + 20.0 * width).min(f_high);
        let window: Vec<f64> = (0..801).map(|k| lo + (hi - lo) * k as f64 / 800.0).collect();
        let r = resonance_fit(&sweep_s21(network, &window)?)?;
        width = r.f0 / r.loaded_q;
        center = r.f0;
        fit = Some(r);
    }
    Ok(fit.unwrap())
}

/// Uniform loss (dB/m) at which the loaded Q of the resonance in
/// [f_low, f_high] equals `target_q`, found by bisection in log α.
///
/// A resonance too lossy to resolve counts as lying below the target.
pub fn fit_uniform_loss(network: &TransmissionNetwork, target_q: f64, f_low: f64, f_high: f64) -> Result<f64> {
    let q_at = |db: f64| -> Result<f64> {
        match find_resonance(&network.with_loss(db)?, f_low, f_high) {
            Ok(fit) => Ok(fit.loaded_q),
            Err(Error::FitFailure(_)) if db > 0.0 => Ok(0.0),
            Err(e) => Err(e),
        }
    };
    let q0 = q_at(0.0)?;
    if !(target_q > 0.0) || target_q >= q0 {
        return Err(Error::FitFailure(format!("target Q {target_q} is not below the lossless Q {q0:.4e}")));
    }
    let (mut lo, mut hi) = (1e-6f64, 1.0f64);
    while q_at(hi)? > target_q {
        lo = hi;
        hi *= 4.0;
        if hi > 1e4 {
            return Err(Error::FitFailure("target Q needs more loss than the search range allows".into()));
        }
    }
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if q_at(mid)? > target_q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-6 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Abcd, b: Abcd, tol: f64) -> bool {
        (a - b).iter().all(|z| z.norm() < tol)
    }

    #[test]
    fn zero_length_is_identity() {
        let s = LineSection::new(73.0, 0.0, 7.72, 3.0).unwrap();
        assert!(close(abcd(&s, 5e9).unwrap(), Abcd::identity(), 1e-15));
    }

    #[test]
    fn half_wave_is_minus_identity() {
        let f = 6e9;
        let s = LineSection::new(30.0, 0.0, 7.72, 0.0).unwrap();
        let s = LineSection { length_m: 2.0 * quarter_wave_design(f, 7.72).unwrap(), ..s };
        assert!(close(abcd(&s, f).unwrap(), -Abcd::identity(), 1e-12));
    }

    #[test]
    fn invalid_inputs() {
        assert!(LineSection::new(0.0, 1e-3, 7.72, 0.0).is_err());
        assert!(LineSection::new(50.0, -1e-3, 7.72, 0.0).is_err());
        assert!(LineSection::new(50.0, 1e-3, 0.5, 0.0).is_err());
        assert!(LineSection::new(50.0, 1e-3, 7.72, -1.0).is_err());
        let s = LineSection::new(50.0, 1e-3, 7.72, 0.0).unwrap();
        assert!(abcd(&s, 0.0).is_err());
        assert!(TransmissionNetwork::new(vec![], 50.0).is_err());
        assert!(sweep_s21(&TransmissionNetwork::reference_geometry(), &[2e9, 1e9]).is_err());
    }

    #[test]
    fn quarter_wave_transformer() {
        let f = 6.75e9;
        let z = 95.0;
        let s = LineSection::new(z, quarter_wave_design(f, 7.72).unwrap(), 7.72, 0.0).unwrap();
        let net = TransmissionNetwork::new(vec![s], 50.0).unwrap();
        let oracle = 2.0 * 50.0 * z / (50.0 * 50.0 + z * z);
        assert!((s21(&net, f).unwrap().norm() - oracle).abs() < 1e-10);
    }

    #[test]
    fn quarter_wave_lengths() {
        let l = quarter_wave_design(6.75e9, 7.72).unwrap();
        assert!((l - 4.0e-3).abs() < 0.02e-3, "{l}");
        assert!((quarter_wave_design(SPEED_OF_LIGHT / 4.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let a = quarter_wave_design(3e9, 5.0).unwrap();
        assert!((quarter_wave_design(6e9, 5.0).unwrap() - a / 2.0).abs() < 1e-18);
        assert!(quarter_wave_design(0.0, 5.0).is_err());
    }

    #[test]
    fn gap_fraction_formula() {
        assert!((quarter_wave_gap_fraction(95.0, 30.0) - 0.6956).abs() < 1e-3);
    }

    #[test]
    fn synthetic_lorentzian_q_agrees() {
        let (f0, fwhm) = (7.3e9, 7.3e9 / 2e4);
        let f: Vec<f64> = (0..801).map(|k| f0 - 20.0 * fwhm + 40.0 * fwhm * k as f64 / 800.0).collect();
        let db = f.iter().map(|v| {
            let x = 2.0 * (v - f0) / fwhm;
            10.0 * (0.5 / (1.0 + x * x)).log10()
        });
        let spec = S21Spectrum { f_hz: f.clone(), s21_db: db.collect(), s21_phase_rad: vec![0.0; f.len()] };
        let r = resonance_fit(&spec).unwrap();
        assert!((r.f0 / f0 - 1.0).abs() < 1e-9);
        assert!((r.loaded_q / 2e4 - 1.0).abs() < 1e-6);
        assert!((r.q_3db / r.loaded_q - 1.0).abs() < 0.05);
        assert!((r.insertion_loss_db - 3.0103).abs() < 1e-3);
    }

    #[test]
    fn two_peaks_fail() {
        let f: Vec<f64> = (0..401).map(|k| k as f64).collect();
        let db = f.iter().map(|v| {
            let l = |c: f64| 1.0 / (1.0 + ((v - c) / 5.0).powi(2));
            10.0 * (l(100.0) + l(300.0)).log10()
        });
        let spec = S21Spectrum { f_hz: f.clone(), s21_db: db.collect(), s21_phase_rad: vec![0.0; f.len()] };
        assert!(matches!(resonance_fit(&spec), Err(Error::FitFailure(_))));
        let flat = S21Spectrum { f_hz: f.clone(), s21_db: f.iter().map(|v| -v * 0.01).collect(), s21_phase_rad: vec![0.0; f.len()] };
        assert!(resonance_fit(&flat).is_err());
    }

    #[test]
    fn network_file_round_trip() {
        let net = TransmissionNetwork::reference_geometry();
        let mut buf = Vec::new();
        net.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# port_impedance_ohm: 50\nimpedance_ohm,length_m,eps_eff,loss_db_per_m\n"));
        assert_eq!(TransmissionNetwork::read_csv(&buf[..]).unwrap(), net);
    }

    #[test]
    fn spectrum_file_round_trip() {
        let net = TransmissionNetwork::reference_geometry();
        let s = sweep_s21(&net, &[1e9, 5e9, 7e9]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("f_hz,s21_db,s21_phase_rad\n"));
        assert_eq!(S21Spectrum::read_csv(&buf[..]).unwrap(), s);
    }

    fn arb_network() -> impl Strategy<Value = TransmissionNetwork> {
        proptest::collection::vec((5.0f64..200.0, 0.0f64..1e-2, 1.0f64..12.0), 1..8)
            .prop_map(|v| TransmissionNetwork::new(v.into_iter().map(|(z, l, e)| LineSection::new(z, l, e, 0.0).unwrap()).collect(), 50.0).unwrap())
    }

    proptest! {
        #[test]
        fn lossless_cascade_is_reciprocal_and_conserves_energy(net in arb_network(), f in 1e8f64..2e10) {
            let m = net.cascade(f).unwrap();
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            prop_assert!((det - Complex64::new(1.0, 0.0)).norm() < 1e-10);
            let t = s21(&net, f).unwrap();
            let r = s11(&net, f).unwrap();
            prop_assert!((t.norm_sqr() + r.norm_sqr() - 1.0).abs() < 1e-10);
            prop_assert!((t - s21(&net.reversed(), f).unwrap()).norm() < 1e-10);
        }

        #[test]
        fn matched_line_transmits_fully(l in 0.0f64..0.1, f in 1e8f64..2e10) {
            let net = TransmissionNetwork::new(vec![LineSection::new(50.0, l, 7.72, 0.0).unwrap()], 50.0).unwrap();
            prop_assert!((s21(&net, f).unwrap().norm() - 1.0).abs() < 1e-12);
        }
    }
}
