//! Experiment configuration: a TOML file whose physical values carry unit
//! suffixes. Every section has defaults, so an empty file is a valid
//! configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::units::{Hertz, Kelvin, Meters, Seconds, Tesla, Volts, VoltsPerMeter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Magnetic,
    Electric,
}

/// A sampling axis: either `start`/`stop`/`points` or explicit `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid<Q> {
    #[serde(default = "none", skip_serializing_if = "Option::is_none")]
    pub start: Option<Q>,
    #[serde(default = "none", skip_serializing_if = "Option::is_none")]
    pub stop: Option<Q>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default = "none", skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Q>>,
}

fn none<T>() -> Option<T> {
    None
}

pub trait Si: Copy {
    fn si(self) -> f64;
}

macro_rules! si {
    ($($t:ty),*) => {
        $(impl Si for $t {
            fn si(self) -> f64 {
                self.0
            }
        })*
    };
}
si!(Tesla, Hertz, Seconds, VoltsPerMeter, Meters);

impl<Q: Si> Grid<Q> {
    pub fn linear(start: Q, stop: Q, points: usize) -> Self {
        Grid { start: Some(start), stop: Some(stop), points: Some(points), values: None }
    }

    pub fn list(values: Vec<Q>) -> Self {
        Grid { start: None, stop: None, points: None, values: Some(values) }
    }

    /// Sample positions in SI units.
    pub fn values(&self) -> Vec<f64> {
        match (&self.values, self.start, self.stop, self.points) {
            (Some(v), ..) => v.iter().map(|q| q.si()).collect(),
            (None, Some(a), Some(b), Some(1)) if a.si() == b.si() => vec![a.si()],
            (None, Some(a), Some(b), Some(n)) => {
                let (a, b) = (a.si(), b.si());
                (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
            }
            _ => Vec::new(),
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        let shape_ok = match (&self.values, &self.start, &self.stop, self.points) {
            (Some(_), None, None, None) => true,
            (None, Some(_), Some(_), Some(_)) => true,
            _ => false,
        };
        if !shape_ok {
            return Err(CliError::Config(format!("{name}: give either start, stop and points, or values")));
        }
        let v = self.values();
        if v.is_empty() {
            return Err(CliError::Config(format!("{name}: grid is empty")));
        }
        if v.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CliError::Config(format!("{name}: grid must be strictly ascending")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub b0: Tesla,
    /// Direction of B₀; normalized internally.
    pub direction: [f64; 3],
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig { b0: Tesla(0.25), direction: [0.0, 0.0, 1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    pub channel: ChannelKind,
    /// Stark coefficient file; the built-in coefficients when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<PathBuf>,
    /// Fraction of the travelling-wave RF magnetic field that accompanies the
    /// electric drive; no magnetic leak when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leakage: Option<f64>,
}

impl Default for DriveConfig {
    fn default() -> Self {
        DriveConfig { channel: ChannelKind::Electric, coefficients: None, leakage: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSweepConfig {
    pub probe_frequency: Hertz,
    pub fields: Grid<Tesla>,
    /// Gaussian standard deviation of each ESR line.
    pub linewidth: Tesla,
}

impl Default for FieldSweepConfig {
    fn default() -> Self {
        FieldSweepConfig {
            probe_frequency: Hertz(7.3e9),
            fields: Grid::linear(Tesla(0.23), Tesla(0.29), 1201),
            linewidth: Tesla(0.2e-3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndorConfig {
    /// Windows around every transition the channel can drive when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Grid<Hertz>>,
    pub rf_duration: Seconds,
    pub magnetic_amplitude: Tesla,
    /// The species' operating field when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub electric_amplitude: Option<VoltsPerMeter>,
    /// Index of the ESR line read out; the mean over all lines when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub readout_line: Option<usize>,
}

impl Default for EndorConfig {
    fn default() -> Self {
        EndorConfig {
            frequencies: None,
            rf_duration: Seconds(250e-6),
            magnetic_amplitude: Tesla(10e-6),
            electric_amplitude: None,
            readout_line: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RabiMapConfig {
    /// Half the lowest NMR transition frequency for the electric channel,
    /// the transition itself for the magnetic one, when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carrier: Option<Hertz>,
    pub durations: Grid<Seconds>,
    pub electric_amplitudes: Grid<VoltsPerMeter>,
    pub magnetic_amplitudes: Grid<Tesla>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub readout_line: Option<usize>,
}

impl Default for RabiMapConfig {
    fn default() -> Self {
        RabiMapConfig {
            carrier: None,
            durations: Grid::linear(Seconds(0.0), Seconds(2e-3), 101),
            electric_amplitudes: Grid::linear(VoltsPerMeter(1e4), VoltsPerMeter(4e4), 7),
            magnetic_amplitudes: Grid::linear(Tesla(1e-5), Tesla(1e-4), 7),
            readout_line: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub enabled: bool,
    pub lateral_points: usize,
    pub depth_points: usize,
    pub depth: Meters,
    pub center_width: Meters,
    pub gap_width: Meters,
    pub standoff: Meters,
    pub drive_voltage: Volts,
    pub eps_eff: f64,
    /// Tabulated field map replacing the analytic CPW model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_map: Option<PathBuf>,
    /// Tabulated depth profile replacing the species default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub implant_table: Option<PathBuf>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            enabled: false,
            lateral_points: 64,
            depth_points: 32,
            depth: Meters(2e-6),
            center_width: Meters(10e-6),
            gap_width: Meters(10e-6),
            standoff: Meters(2e-6),
            drive_voltage: Volts(1.0),
            eps_eff: 7.72,
            field_map: None,
            implant_table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PbgConfig {
    /// Network CSV; the built-in resonator geometry when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<PathBuf>,
    pub frequencies: Grid<Hertz>,
    /// Transmission level (dB) that delimits the bandgap.
    pub gap_threshold_db: f64,
}

impl Default for PbgConfig {
    fn default() -> Self {
        PbgConfig { network: None, frequencies: Grid::linear(Hertz(0.6e6), Hertz(12e9), 20000), gap_threshold_db: -20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write a gnuplot script next to each data file.
    pub plot_script: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("ednmr-out"), plot_script: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub species: String,
    /// Donor constants file; the built-in table when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub species_file: Option<PathBuf>,
    pub temperature: Kelvin,
    /// Reserved; no subcommand draws random numbers.
    pub seed: u64,
    pub field: FieldConfig,
    pub drive: DriveConfig,
    pub field_sweep: FieldSweepConfig,
    pub endor: EndorConfig,
    pub rabi_map: RabiMapConfig,
    pub ensemble: EnsembleConfig,
    pub pbg: PbgConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            species: "As".into(),
            species_file: None,
            temperature: Kelvin(1.9),
            seed: 0,
            field: FieldConfig::default(),
            drive: DriveConfig::default(),
            field_sweep: FieldSweepConfig::default(),
            endor: EndorConfig::default(),
            rabi_map: RabiMapConfig::default(),
            ensemble: EnsembleConfig::default(),
            pbg: PbgConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn rebase(path: &mut Option<PathBuf>, base: &Path) {
    if let Some(p) = path {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML text without touching the filesystem.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().trim().to_string() + &span_hint(text, e.span())))
    }

    /// Reads a configuration file; relative paths inside it are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase_paths(base);
        Ok(cfg)
    }

    pub fn rebase_paths(&mut self, base: &Path) {
        rebase(&mut self.species_file, base);
        rebase(&mut self.drive.coefficients, base);
        rebase(&mut self.ensemble.field_map, base);
        rebase(&mut self.ensemble.implant_table, base);
        rebase(&mut self.pbg.network, base);
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize configuration: {e}")))
    }

    /// Range, grid and file checks.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.species.trim().is_empty() {
            return bad("species is empty".into());
        }
        if !(self.temperature.si() > 0.0) {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if !(self.field.b0.si() >= 0.0) {
            return bad(format!("field.b0 must be non-negative, got {}", self.field.b0));
        }
        let d = self.field.direction;
        if !d.iter().all(|x| x.is_finite()) || d.iter().map(|x| x * x).sum::<f64>() == 0.0 {
            return bad("field.direction must be a finite non-zero vector".into());
        }
        if let Some(l) = self.drive.leakage {
            if !(l >= 0.0 && l.is_finite()) {
                return bad(format!("drive.leakage must be a non-negative fraction, got {l}"));
            }
        }
        if !(self.field_sweep.probe_frequency.si() > 0.0) || !(self.field_sweep.linewidth.si() > 0.0) {
            return bad("field_sweep.probe_frequency and linewidth must be positive".into());
        }
        self.field_sweep.fields.check("field_sweep.fields")?;
        if let Some(g) = &self.endor.frequencies {
            g.check("endor.frequencies")?;
        }
        if !(self.endor.rf_duration.si() > 0.0) {
            return bad("endor.rf_duration must be positive".into());
        }
        if !(self.endor.magnetic_amplitude.si() >= 0.0) || self.endor.electric_amplitude.is_some_and(|e| !(e.si() >= 0.0)) {
            return bad("endor amplitudes must be non-negative".into());
        }
        self.rabi_map.durations.check("rabi_map.durations")?;
        self.rabi_map.electric_amplitudes.check("rabi_map.electric_amplitudes")?;
        self.rabi_map.magnetic_amplitudes.check("rabi_map.magnetic_amplitudes")?;
        if self.rabi_map.durations.values()[0] < 0.0 {
            return bad("rabi_map.durations must be non-negative".into());
        }
        if self.rabi_map.carrier.is_some_and(|c| !(c.si() > 0.0)) {
            return bad("rabi_map.carrier must be positive".into());
        }
        let e = &self.ensemble;
        if e.lateral_points == 0 || e.depth_points == 0 {
            return bad("ensemble grids need at least one point".into());
        }
        if !(e.depth.si() > 0.0) || !(e.eps_eff >= 1.0) {
            return bad("ensemble.depth must be positive and eps_eff at least 1".into());
        }
        self.pbg.frequencies.check("pbg.frequencies")?;
        if self.pbg.frequencies.values()[0] <= 0.0 {
            return bad("pbg.frequencies must be positive".into());
        }
        for (name, path) in [
            ("species_file", &self.species_file),
            ("drive.coefficients", &self.drive.coefficients),
            ("ensemble.field_map", &self.ensemble.field_map),
            ("ensemble.implant_table", &self.ensemble.implant_table),
            ("pbg.network", &self.pbg.network),
        ] {
            if let Some(p) = path {
                if !p.is_file() {
                    return bad(format!("{name}: {} does not exist", p.display()));
                }
            }
        }
        Ok(())
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(s) => format!(" (line {})", text[..s.start.min(text.len())].lines().count().max(1)),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn default_round_trips() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn grids() {
        let g = Grid::linear(Hertz(1.0), Hertz(3.0), 3);
        assert_eq!(g.values(), vec![1.0, 2.0, 3.0]);
        assert!(Grid::list(vec![Hertz(2.0), Hertz(1.0)]).check("g").is_err());
        assert!(Grid::<Hertz> { start: Some(Hertz(1.0)), stop: None, points: None, values: None }.check("g").is_err());
        assert!(Grid::linear(Hertz(1.0), Hertz(1.0), 1).check("g").is_ok());
        assert!(Grid::linear(Hertz(1.0), Hertz(2.0), 0).check("g").is_err());
    }

    #[test]
    fn unknown_keys_and_units_are_config_errors() {
        assert!(ExperimentConfig::parse("specie = \"P\"").is_err());
        assert!(ExperimentConfig::parse("[field]\nb0 = \"0.25\"").is_err());
        assert!(ExperimentConfig::parse("[field]\nb0 = \"0.25 MHz\"").is_err());
        let c = ExperimentConfig::parse("temperature = \"-1 K\"").unwrap();
        assert!(c.validate().is_err());
    }
}
