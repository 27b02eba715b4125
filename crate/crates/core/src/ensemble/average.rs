use rayon::prelude::*;

use super::cpw::FieldSource;
use super::implant::DepthProfile;
use crate::dynamics::{hahn_echo_power_sweep, Davies, FieldScales, HahnTemplate};
use crate::error::{invalid, Result};
use crate::spincore::LevelSet;

/// Points whose weight falls below this are dropped by [`build_ensemble`].
pub const PRUNE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsemblePoint {
    pub weight: f64,
    pub scales: FieldScales,
    /// Lateral position (m).
    pub x: f64,
    /// Depth below the sample surface (m).
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub points: Vec<EnsemblePoint>,
}

impl EnsembleSpec {
    pub fn new(points: Vec<EnsemblePoint>) -> Result<Self> {
        if points.is_empty() {
            return invalid("ensemble has no points");
        }
        if points.iter().any(|p| !(p.weight >= 0.0) || !(p.scales.b1 >= 0.0 && p.scales.e2 >= 0.0 && p.scales.b2 >= 0.0)) {
            return invalid("ensemble weights and scales must be non-negative");
        }
        let total: f64 = points.iter().map(|p| p.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("ensemble weights sum to {total}, not 1"));
        }
        Ok(EnsembleSpec { points })
    }

    pub fn single(scales: FieldScales) -> Self {
        EnsembleSpec { points: vec![EnsemblePoint { weight: 1.0, scales, x: 0.0, depth: 0.0 }] }
    }

    /// Equal-weight points with the given scales.
    pub fn uniform(scales: &[FieldScales]) -> Result<Self> {
        let w = 1.0 / scales.len() as f64;
        Self::new(scales.iter().map(|&s| EnsemblePoint { weight: w, scales: s, x: 0.0, depth: 0.0 }).collect())
    }

    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.points.iter().map(|p| p.weight).collect())
    }

    /// Drops points lighter than `threshold` and renormalizes.
    pub fn pruned(&self, threshold: f64) -> Result<Self> {
        let kept: Vec<EnsemblePoint> = self.points.iter().copied().filter(|p| p.weight >= threshold).collect();
        renormalized(kept)
    }

    /// Multiplies each weight by `f(point)` and renormalizes.
    pub fn reweighted(&self, f: impl Fn(&EnsemblePoint) -> f64) -> Result<Self> {
        renormalized(self.points.iter().map(|p| EnsemblePoint { weight: p.weight * f(p), ..*p }).collect())
    }

    /// Multiplies every B₁ scale by `s`.
    pub fn with_b1_power(&self, s: f64) -> Self {
        EnsembleSpec {
            points: self
                .points
                .iter()
                .map(|p| EnsemblePoint { scales: FieldScales { b1: p.scales.b1 * s, ..p.scales }, ..*p })
                .collect(),
        }
    }
}

fn renormalized(mut points: Vec<EnsemblePoint>) -> Result<EnsembleSpec> {
    let total = compensated_sum(points.iter().map(|p| p.weight).collect());
    if !(total > 0.0) {
        return invalid("ensemble has no weight left");
    }
    for p in &mut points {
        p.weight /= total;
    }
    EnsembleSpec::new(points)
}

/// Order-independent sum: terms are sorted, then added with Neumaier
/// compensation.
pub fn compensated_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(|a, b| a.total_cmp(b));
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// 64 lateral positions across two gap widths, starting at the line center.
pub fn default_lateral_grid(gap_width: f64) -> Vec<f64> {
    uniform_grid(2.0 * gap_width, 64)
}

/// 32 depths through the 2 μm epilayer.
pub fn default_depth_grid() -> Vec<f64> {
    uniform_grid(2e-6, 32)
}

/// Midpoints of `n` equal cells on [0, span].
pub fn uniform_grid(span: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| (k as f64 + 0.5) * span / n as f64).collect()
}

/// Outer product of a lateral line (equal weights) and a depth profile.
pub fn build_ensemble(source: &FieldSource, profile: &DepthProfile, lateral: &[f64], depth: &[f64]) -> Result<EnsembleSpec> {
    if lateral.is_empty() {
        return invalid("lateral grid is empty");
    }
    let dw = profile.weights(depth)?;
    let lw = 1.0 / lateral.len() as f64;
    let standoff = source.standoff();
    let coords: Vec<(f64, f64)> = lateral.iter().flat_map(|&x| depth.iter().map(move |&d| (x, d))).collect();
    let positions: Vec<(f64, f64)> = coords.iter().map(|&(x, d)| (x, standoff + d)).collect();
    let scales = source.scales(&positions)?;
    let points = coords
        .iter()
        .zip(scales)
        .enumerate()
        .map(|(k, (&(x, d), s))| EnsemblePoint { weight: lw * dw[k % depth.len()], scales: s, x, depth: d })
        .collect();
    renormalized(points)?.pruned(PRUNE_THRESHOLD)
}

/// Σ wᵢ fᵢ, evaluated in parallel and reduced independently of point order.
pub fn ensemble_average<F>(spec: &EnsembleSpec, per_point: F) -> Result<Vec<f64>>
where
    F: Fn(&EnsemblePoint) -> Result<Vec<f64>> + Sync,
{
    let results = spec.points.par_iter().map(&per_point).collect::<Result<Vec<_>>>()?;
    let len = results[0].len();
    if results.iter().any(|r| r.len() != len) {
        return invalid("per-point signals differ in shape");
    }
    Ok((0..len)
        .map(|k| compensated_sum(spec.points.iter().zip(&results).map(|(p, r)| p.weight * r[k]).collect()))
        .collect())
}

/// Echo collected from a spin with resonator coupling `b1` when its nominal
/// π/2 and π pulses are scaled by `power · b1`: b₁ sin³(π·power·b₁/2).
/// Negative values are inverted echoes.
pub fn detection_weight(b1: f64, power: f64) -> f64 {
    b1 * (0.5 * std::f64::consts::PI * power * b1).sin().powi(3)
}

/// Echo amplitude versus microwave power scale, summed over the ensemble
/// with each spin's coupling b₁ as its detection weight.
pub fn ensemble_echo_sweep(
    spec: &EnsembleSpec,
    levels: &LevelSet,
    pair: (usize, usize),
    power_scales: &[f64],
    template: HahnTemplate,
    temperature: f64,
) -> Result<Vec<f64>> {
    ensemble_average(spec, |p| {
        let scaled: Vec<f64> = power_scales.iter().map(|s| s * p.scales.b1).collect();
        let magnitude = hahn_echo_power_sweep(levels, pair, &scaled, template, temperature)?;
        // The magnitude model drops the sign of sin θ₁; restore it.
        Ok(magnitude
            .into_iter()
            .zip(&scaled)
            .map(|(e, s)| e * (template.first_angle * s).sin().signum() * p.scales.b1)
            .collect())
    })
}

/// Power scale that maximizes the ensemble echo, searched on (0, 3].
pub fn calibrate_b1(spec: &EnsembleSpec) -> f64 {
    let grid: Vec<f64> = (1..=3000).map(|k| k as f64 * 1e-3).collect();
    let echo = |s: f64| compensated_sum(spec.points.iter().map(|p| p.weight * detection_weight(p.scales.b1, s)).collect());
    let vals: Vec<f64> = grid.iter().map(|&s| echo(s)).collect();
    let k = (0..grid.len()).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    grid[k]
}

/// Ensemble-averaged Davies contrast trace.
///
/// The microwave power is first calibrated on the ensemble echo; each point
/// then contributes in proportion to its (signed) echo.
pub fn ensemble_rabi_trace(davies: &Davies, spec: &EnsembleSpec, carrier: f64, amplitude: f64, durations: &[f64]) -> Result<Vec<f64>> {
    let power = calibrate_b1(spec);
    let norm = compensated_sum(spec.points.iter().map(|p| p.weight * detection_weight(p.scales.b1, power)).collect());
    if !(norm > 0.0) {
        return Err(crate::error::Error::Numerical("ensemble echo vanishes at the calibrated power".into()));
    }
    let sum = ensemble_average(spec, |p| {
        let d = detection_weight(p.scales.b1, power) / norm;
        let scales = FieldScales { b1: p.scales.b1 * power, ..p.scales };
        Ok(davies.trace(carrier, amplitude, durations, scales)?.into_iter().map(|v| v * d).collect())
    })?;
    Ok(sum)
}
