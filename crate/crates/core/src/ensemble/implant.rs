use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Gaussian implant: projected range and straggle (m) with a dose weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianImplant {
    pub range: f64,
    pub straggle: f64,
    pub weight: f64,
}

/// Uniform doping through an epilayer of `thickness` (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Epilayer {
    pub thickness: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImplantProfile {
    #[serde(default)]
    pub implants: Vec<GaussianImplant>,
    #[serde(default)]
    pub epilayer: Option<Epilayer>,
}

impl ImplantProfile {
    pub fn gaussian(range: f64, straggle: f64) -> Self {
        ImplantProfile { implants: vec![GaussianImplant { range, straggle, weight: 1.0 }], epilayer: None }
    }

    pub fn uniform(thickness: f64) -> Self {
        ImplantProfile { implants: Vec::new(), epilayer: Some(Epilayer { thickness, weight: 1.0 }) }
    }

    /// Default distribution for a donor species: ion-implanted As and Bi,
    /// P grown into the 2 μm epilayer.
    pub fn for_species(label: &str) -> Result<Self> {
        match label {
            "P" => Ok(Self::uniform(2e-6)),
            "As" => Ok(Self::gaussian(150e-9, 60e-9)),
            "Bi" => Ok(Self::gaussian(90e-9, 35e-9)),
            _ => Err(Error::NotFound(format!("no default implant profile for species {label:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.implants.is_empty() && self.epilayer.is_none() {
            return invalid("implant profile has no components");
        }
        for g in &self.implants {
            if !(g.straggle > 0.0) || !g.range.is_finite() || !(g.weight >= 0.0) {
                return invalid("implant needs positive straggle, finite range and non-negative weight");
            }
        }
        if let Some(e) = self.epilayer {
            if !(e.thickness > 0.0) || !(e.weight >= 0.0) {
                return invalid("epilayer needs positive thickness and non-negative weight");
            }
        }
        Ok(())
    }
}

fn normalize(mut w: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Numerical("depth weights sum to zero".into()));
    }
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

/// Normalized donor weights on `depth_grid` (m below the sample surface).
pub fn implant_weights(profile: &ImplantProfile, depth_grid: &[f64]) -> Result<Vec<f64>> {
    if depth_grid.is_empty() {
        return invalid("depth grid is empty");
    }
    if depth_grid.iter().any(|d| !(*d >= 0.0)) {
        return invalid("depths must be non-negative");
    }
    profile.validate()?;
    let mut total = vec![0.0; depth_grid.len()];
    for g in &profile.implants {
        let mut w: Vec<f64> = depth_grid.iter().map(|d| (-0.5 * ((d - g.range) / g.straggle).powi(2)).exp()).collect();
        if w.iter().all(|v| *v == 0.0) {
            let k = (0..depth_grid.len())
                .min_by(|&a, &b| (depth_grid[a] - g.range).abs().total_cmp(&(depth_grid[b] - g.range).abs()))
                .unwrap();
            w[k] = 1.0;
        }
        for (t, v) in total.iter_mut().zip(normalize(w)?) {
            *t += g.weight * v;
        }
    }
    if let Some(e) = profile.epilayer {
        let inside = depth_grid.iter().filter(|d| **d <= e.thickness).count();
        if inside == 0 {
            return invalid("depth grid lies outside the epilayer");
        }
        for (t, d) in total.iter_mut().zip(depth_grid) {
            if *d <= e.thickness {
                *t += e.weight / inside as f64;
            }
        }
    }
    normalize(total)
}

/// Tabulated depth profile with rows `depth,weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplantTable {
    pub depth: Vec<f64>,
    pub weight: Vec<f64>,
}

#[derive(Deserialize)]
struct TableRow {
    depth: f64,
    weight: f64,
}

impl ImplantTable {
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
        let rows = rd.deserialize().collect::<std::result::Result<Vec<TableRow>, _>>()?;
        if rows.len() < 2 {
            return Err(Error::Parse("implant table needs at least two rows".into()));
        }
        if rows.windows(2).any(|w| w[1].depth <= w[0].depth) {
            return Err(Error::Parse("implant table depths must increase".into()));
        }
        if rows.iter().any(|r| !(r.weight >= 0.0) || !r.depth.is_finite()) {
            return Err(Error::Parse("implant table weights must be non-negative".into()));
        }
        Ok(ImplantTable { depth: rows.iter().map(|r| r.depth).collect(), weight: rows.iter().map(|r| r.weight).collect() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Linear interpolation onto `depth_grid`, zero outside the table,
    /// normalized.
    pub fn weights(&self, depth_grid: &[f64]) -> Result<Vec<f64>> {
        if depth_grid.is_empty() {
            return invalid("depth grid is empty");
        }
        let w = depth_grid
            .iter()
            .map(|&d| {
                let k = self.depth.partition_point(|&x| x <= d);
                if k == 0 || k == self.depth.len() {
                    if d == self.depth[self.depth.len() - 1] { self.weight[self.weight.len() - 1] } else { 0.0 }
                } else {
                    let t = (d - self.depth[k - 1]) / (self.depth[k] - self.depth[k - 1]);
                    self.weight[k - 1] * (1.0 - t) + self.weight[k] * t
                }
            })
            .collect();
        normalize(w)
    }
}

/// Depth distribution from either parameters or a table.
#[derive(Debug, Clone, PartialEq)]
pub enum DepthProfile {
    Parametric(ImplantProfile),
    Table(ImplantTable),
}

impl DepthProfile {
    pub fn weights(&self, depth_grid: &[f64]) -> Result<Vec<f64>> {
        match self {
            DepthProfile::Parametric(p) => implant_weights(p, depth_grid),
            DepthProfile::Table(t) => t.weights(depth_grid),
        }
    }
}
