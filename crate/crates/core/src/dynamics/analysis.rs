use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Residual of the least-squares fit a + b cos(2πνt) + c sin(2πνt).
fn sinusoid_residual(times: &[f64], signal: &[f64], nu: f64) -> f64 {
    let n = times.len();
    let w = 2.0 * std::f64::consts::PI * nu;
    let a = DMatrix::from_fn(n, 3, |r, k| match k {
        0 => 1.0,
        1 => (w * times[r]).cos(),
        _ => (w * times[r]).sin(),
    });
    let y = DVector::from_column_slice(signal);
    match a.clone().svd(true, true).solve(&y, 1e-12) {
        Ok(x) => (a * x - y).norm_squared(),
        Err(_) => f64::INFINITY,
    }
}

/// Frequency (Hz) of the dominant sinusoid in a uniformly or non-uniformly
/// sampled trace.
pub fn fit_rabi_frequency(times: &[f64], signal: &[f64]) -> Result<f64> {
    if times.len() != signal.len() {
        return invalid("times and signal differ in length");
    }
    if times.len() < 5 {
        return invalid("at least five samples are needed for a frequency fit");
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return invalid("sample times must span a positive interval");
    }
    let min_dt = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if !(min_dt > 0.0) {
        return invalid("sample times must be strictly increasing");
    }
    let lo = 0.25 / span;
    let hi = 0.5 / min_dt;
    let count = (16.0 * hi / lo).ceil().min(20000.0) as usize;
    let grid: Vec<f64> = (0..=count).map(|k| lo + (hi - lo) * k as f64 / count as f64).collect();
    let res: Vec<f64> = grid.iter().map(|&nu| sinusoid_residual(times, signal, nu)).collect();
    let best = (0..res.len()).min_by(|&a, &b| res[a].total_cmp(&res[b])).unwrap();
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = sinusoid_residual(times, signal, x1);
    let mut f2 = sinusoid_residual(times, signal, x2);
    for _ in 0..100 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = sinusoid_residual(times, signal, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = sinusoid_residual(times, signal, x2);
        }
        if (b - a) < 1e-10 * b {
            break;
        }
    }
    let nu = 0.5 * (a + b);
    if !nu.is_finite() {
        return Err(Error::FitFailure("Rabi frequency fit diverged".into()));
    }
    Ok(nu)
}

/// Slope of log y against log x by least squares.
pub fn power_law_exponent(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return invalid("power-law fit needs two or more paired samples");
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return invalid("power-law fit needs positive values");
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("power-law fit needs distinct x values");
    }
    Ok(sxy / sxx)
}

/// Axis positions of local maxima of `signal` exceeding `threshold`.
pub fn find_features(axis: &[f64], signal: &[f64], threshold: f64) -> Vec<f64> {
    let n = signal.len().min(axis.len());
    let mut out = Vec::new();
    for k in 0..n {
        let left = if k == 0 { f64::NEG_INFINITY } else { signal[k - 1] };
        let right = if k + 1 == n { f64::NEG_INFINITY } else { signal[k + 1] };
        if signal[k] > threshold && signal[k] > left && signal[k] >= right {
            out.push(axis[k]);
        }
    }
    out
}

/// Half peak-to-peak amplitude of `signal` over samples whose time lies in
/// [start, end).
pub fn window_amplitude(times: &[f64], signal: &[f64], start: f64, end: f64) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (t, s) in times.iter().zip(signal) {
        if *t >= start && *t < end {
            lo = lo.min(*s);
            hi = hi.max(*s);
        }
    }
    if hi >= lo { 0.5 * (hi - lo) } else { 0.0 }
}
