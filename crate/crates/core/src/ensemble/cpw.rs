use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::SPEED_OF_LIGHT;
use crate::dynamics::{FieldScales, MagneticLeak};
use crate::error::{invalid, Error, Result};

/// Cross-section of a coplanar waveguide and its drive levels.
///
/// The center conductor spans |x| < center_width/2, the gaps extend a further
/// `gap_width` on each side and the ground planes fill the rest. The sample
/// surface sits `sample_standoff` above the metal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpwGeometry {
    pub center_width: f64,
    pub gap_width: f64,
    pub sample_standoff: f64,
    /// RF voltage amplitude relative to the nominal one.
    pub drive_voltage: f64,
    /// Microwave current relative to the nominal one.
    pub drive_current: f64,
    /// Amplitude fraction of the suppressed RF field type left by the
    /// termination.
    pub leakage: f64,
    pub eps_eff: f64,
}

impl Default for CpwGeometry {
    fn default() -> Self {
        CpwGeometry {
            center_width: 10e-6,
            gap_width: 10e-6,
            sample_standoff: 2e-6,
            drive_voltage: 1.0,
            drive_current: 1.0,
            leakage: 1.0 / 50.0,
            eps_eff: 7.72,
        }
    }
}

/// Arithmetic-geometric mean.
fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= 1e-15 * a {
            break;
        }
        let next = (0.5 * (a + b), (a * b).sqrt());
        a = next.0;
        b = next.1;
    }
    a
}

/// Complete elliptic integral of the first kind K(k) for modulus k.
pub fn elliptic_k(k: f64) -> f64 {
    std::f64::consts::PI / (2.0 * agm(1.0, (1.0 - k * k).sqrt()))
}

impl CpwGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.center_width > 0.0) || !(self.gap_width > 0.0) {
            return invalid("CPW widths must be positive");
        }
        if !(self.sample_standoff >= 0.0) {
            return invalid("sample standoff must be non-negative");
        }
        if !(self.drive_voltage >= 0.0) || !(self.drive_current >= 0.0) {
            return invalid("drive levels must be non-negative");
        }
        if !(self.leakage >= 0.0) {
            return invalid("leakage must be non-negative");
        }
        if !(self.eps_eff >= 1.0) {
            return invalid("effective permittivity must be at least 1");
        }
        Ok(())
    }

    fn half_widths(&self) -> (f64, f64) {
        let a = 0.5 * self.center_width;
        (a, a + self.gap_width)
    }

    /// Point at which all scales are normalized: the inner gap edge at the
    /// sample surface (lifted slightly when the sample touches the metal).
    pub fn reference_point(&self) -> (f64, f64) {
        let z = if self.sample_standoff > 0.0 { self.sample_standoff } else { 0.05 * self.gap_width };
        (self.half_widths().0, z)
    }

    /// Quasi-static field (E_x, E_z) per volt between center and ground, in
    /// V/m, at height z > 0.
    pub fn electric_field(&self, x: f64, z: f64) -> Result<(f64, f64)> {
        if !(z > 0.0) {
            return invalid(format!("field point must lie above the device plane, got z = {z}"));
        }
        let (a, b) = self.half_widths();
        let w = Complex64::new(x, z);
        let w2 = w * w;
        let f = ((w2 - a * a) * (w2 - b * b)).sqrt().inv();
        let j = elliptic_k((1.0 - (a / b).powi(2)).sqrt()) / b;
        Ok((f.im.abs() / j, f.re.abs() / j))
    }

    /// In-plane electric field per volt at the reference point (V/m).
    pub fn field_per_volt(&self) -> Result<f64> {
        let (x, z) = self.reference_point();
        Ok(self.electric_field(x, z)?.0)
    }

    /// Residual magnetic field per V/m of local electric field.
    pub fn magnetic_leak(&self) -> MagneticLeak {
        MagneticLeak::from_fraction(self.leakage, self.eps_eff)
    }

    /// Travelling-wave magnetic field (T) accompanying an electric field
    /// `e` (V/m) on this line.
    pub fn tem_magnetic_field(&self, e: f64) -> f64 {
        e * self.eps_eff.sqrt() / SPEED_OF_LIGHT
    }
}

/// Relative B₁, E₂ and B₂ at each (x, z) point.
///
/// E₂ follows the in-plane electric field across the gaps; B₁ and B₂ follow
/// the in-plane magnetic field, which is largest over the center conductor.
pub fn cpw_fields(geom: &CpwGeometry, points: &[(f64, f64)]) -> Result<Vec<FieldScales>> {
    geom.validate()?;
    let (xr, zr) = geom.reference_point();
    let (ex0, ez0) = geom.electric_field(xr, zr)?;
    points
        .iter()
        .map(|&(x, z)| {
            let (ex, ez) = geom.electric_field(x, z)?;
            Ok(FieldScales {
                b1: geom.drive_current * ez / ez0,
                e2: geom.drive_voltage * ex / ex0,
                b2: geom.drive_voltage * ez / ez0,
            })
        })
        .collect()
}

/// A tabulated field map with rows `x,z,b1,e2,b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMapRow {
    pub x: f64,
    pub z: f64,
    pub b1: f64,
    pub e2: f64,
    pub b2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub rows: Vec<FieldMapRow>,
}

impl FieldMap {
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
        let rows = rd.deserialize().collect::<std::result::Result<Vec<FieldMapRow>, _>>()?;
        if rows.is_empty() {
            return Err(Error::Parse("field map has no rows".into()));
        }
        for r in &rows {
            if [r.x, r.z, r.b1, r.e2, r.b2].iter().any(|v| !v.is_finite()) || r.b1 < 0.0 || r.e2 < 0.0 || r.b2 < 0.0 {
                return Err(Error::Parse(format!("invalid field map row at x = {}, z = {}", r.x, r.z)));
            }
        }
        Ok(FieldMap { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Samples an analytic geometry on a grid.
    pub fn from_geometry(geom: &CpwGeometry, xs: &[f64], zs: &[f64]) -> Result<Self> {
        let points: Vec<(f64, f64)> = xs.iter().flat_map(|&x| zs.iter().map(move |&z| (x, z))).collect();
        let scales = cpw_fields(geom, &points)?;
        Ok(FieldMap {
            rows: points
                .iter()
                .zip(scales)
                .map(|(&(x, z), s)| FieldMapRow { x, z, b1: s.b1, e2: s.e2, b2: s.b2 })
                .collect(),
        })
    }

    /// Scales at the tabulated point nearest to (x, z).
    pub fn nearest(&self, x: f64, z: f64) -> FieldScales {
        let r = self
            .rows
            .iter()
            .min_by(|a, b| {
                let da = (a.x - x).powi(2) + (a.z - z).powi(2);
                let db = (b.x - x).powi(2) + (b.z - z).powi(2);
                da.total_cmp(&db)
            })
            .expect("field map is non-empty");
        FieldScales { b1: r.b1, e2: r.e2, b2: r.b2 }
    }
}

/// Where per-point field scales come from.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSource {
    Analytic(CpwGeometry),
    Map(FieldMap),
}

impl FieldSource {
    pub fn scales(&self, points: &[(f64, f64)]) -> Result<Vec<FieldScales>> {
        match self {
            FieldSource::Analytic(g) => cpw_fields(g, points),
            FieldSource::Map(m) => Ok(points.iter().map(|&(x, z)| m.nearest(x, z)).collect()),
        }
    }

    /// Height of the sample surface above the metal.
    pub fn standoff(&self) -> f64 {
        match self {
            FieldSource::Analytic(g) => g.sample_standoff,
            FieldSource::Map(m) => m.rows.iter().map(|r| r.z).fold(f64::INFINITY, f64::min),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lateral(_g: &CpwGeometry, z: f64) -> Vec<(f64, f64)> {
        (0..=400).map(|k| (k as f64 * 0.1e-6, z)).collect()
    }

    #[test]
    fn elliptic_integral_values() {
        assert!((elliptic_k(0.0) - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        assert!((elliptic_k(0.5) - 1.685_750_354_812_596).abs() < 1e-12);
    }

    #[test]
    fn reference_point_is_unity() {
        let g = CpwGeometry::default();
        let s = cpw_fields(&g, &[g.reference_point()]).unwrap()[0];
        assert!((s.b1 - 1.0).abs() < 1e-12 && (s.e2 - 1.0).abs() < 1e-12 && (s.b2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn far_field_is_weak() {
        let g = CpwGeometry::default();
        let z = 10.0 * g.gap_width;
        for s in cpw_fields(&g, &lateral(&g, z)).unwrap() {
            assert!(s.b1 < 0.05 && s.e2 < 0.05 && s.b2 < 0.05, "{s:?}");
        }
    }

    #[test]
    fn voltage_scales_e2_linearly() {
        let g = CpwGeometry::default();
        let g2 = CpwGeometry { drive_voltage: 2.0, ..g };
        let p = lateral(&g, 3e-6);
        for (a, b) in cpw_fields(&g, &p).unwrap().iter().zip(cpw_fields(&g2, &p).unwrap()) {
            assert!((b.e2 - 2.0 * a.e2).abs() <= 1e-12 * a.e2.max(1.0));
            assert_eq!(a.b1, b.b1);
        }
    }

    #[test]
    fn argmax_regions() {
        let g = CpwGeometry::default();
        let (a, b) = (g.center_width / 2.0, g.center_width / 2.0 + g.gap_width);
        let p = lateral(&g, 2e-6);
        let s = cpw_fields(&g, &p).unwrap();
        let arg = |f: &dyn Fn(&FieldScales) -> f64| p[(0..s.len()).max_by(|&i, &j| f(&s[i]).total_cmp(&f(&s[j]))).unwrap()].0;
        let xe = arg(&|s| s.e2);
        let xb = arg(&|s| s.b1);
        assert!(xe > a && xe < b, "E2 peak at {xe}");
        assert!(xb.abs() <= a, "B1 peak at {xb}");
    }

    #[test]
    fn lateral_peak_decays_with_height() {
        let g = CpwGeometry::default();
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for k in 1..40 {
            let s = cpw_fields(&g, &lateral(&g, k as f64 * 1e-6)).unwrap();
            let e = s.iter().map(|s| s.e2).fold(0.0, f64::max);
            let b = s.iter().map(|s| s.b1).fold(0.0, f64::max);
            assert!(e < prev.0 && b < prev.1);
            prev = (e, b);
        }
    }

    #[test]
    fn points_in_plane_are_rejected() {
        let g = CpwGeometry::default();
        assert!(cpw_fields(&g, &[(0.0, 0.0)]).is_err());
        assert!(cpw_fields(&g, &[(0.0, -1e-6)]).is_err());
    }

    #[test]
    fn field_per_volt_matches_gap_estimate() {
        // Close to the metal the gap field approaches V/gap in order of magnitude.
        let g = CpwGeometry::default();
        let e = g.field_per_volt().unwrap();
        assert!(e > 0.2 / g.gap_width && e < 5.0 / g.gap_width, "{e}");
    }

    #[test]
    fn field_map_round_trip() {
        let g = CpwGeometry::default();
        let m = FieldMap::from_geometry(&g, &[0.0, 5e-6, 1e-5], &[2e-6, 4e-6]).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("x,z,b1,e2,b2"));
        let back = FieldMap::read_csv(&buf[..]).unwrap();
        assert_eq!(back, m);
        let s = back.nearest(5.1e-6, 2.1e-6);
        assert!((s.e2 - 1.0).abs() < 1e-12);
    }
}
