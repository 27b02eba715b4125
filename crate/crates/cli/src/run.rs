//! Subcommand execution. Each run writes its data files and a manifest into
//! the output directory.

use std::io::Write;
use std::path::Path;

use ednmr_core::constants::PhysicalConstants;
use ednmr_core::dynamics::{
    boltzmann_populations, davies_endor_spectrum, rabi_map, thermal_state, Davies, DaviesSetup, MagneticLeak, RabiMap,
    ReadoutLine, RfChannel, SpectrumResult,
};
use ednmr_core::ensemble::{
    build_ensemble, ensemble_rabi_trace, uniform_grid, CpwGeometry, DepthProfile, EnsembleSpec, FieldMap, FieldSource,
    ImplantProfile, ImplantTable,
};
use ednmr_core::linalg::{hermiticity_error, CMat, Vec3};
use ednmr_core::pbgnet::{bandgap_edges, find_resonance, s11, s21, sweep_s21, TransmissionNetwork};
use ednmr_core::spincore::{
    build_hamiltonian, esr_field_positions, levels, species, transition_table, LevelLabel, LevelSet, Probe, Spin,
    SpinSystem, StaticField, Transition, TransitionClass,
};
use ednmr_core::starkdrive::{builtin_model, harmonic_components, rabi_rate, CoefficientFile, DriveModel};
use serde::Serialize;

use crate::config::{ChannelKind, ExperimentConfig, Grid};
use crate::units::{Hertz, VoltsPerMeter};
use crate::error::{CliError, Context, Result};
use crate::plot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Energy levels and transition table.
    Levels,
    /// Field-swept ESR spectrum at a fixed probe frequency.
    FieldSweep,
    /// Davies ENDOR spectrum versus RF frequency.
    Endor,
    /// Davies contrast versus RF pulse length and amplitude.
    RabiMap,
    /// Resonator transmission, bandgap edges and defect-mode fit.
    Pbg,
    /// Quick self-consistency checks of the simulator.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Levels => "levels",
            Command::FieldSweep => "field-sweep",
            Command::Endor => "endor",
            Command::RabiMap => "rabi-map",
            Command::Pbg => "pbg",
            Command::Validate => "validate",
        }
    }
}

#[derive(Serialize)]
struct RunInfo<'a> {
    subcommand: &'a str,
    version: &'a str,
    outputs: &'a [String],
}

#[derive(Serialize)]
struct Manifest<'a> {
    run: RunInfo<'a>,
    config: &'a ExperimentConfig,
}

/// Files written by one run, in the output directory.
struct Sink<'a> {
    dir: &'a Path,
    plot: bool,
    written: Vec<String>,
}

impl Sink<'_> {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|source| CliError::Output { path: path.display().to_string(), source })?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn put_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> ednmr_core::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf).numerical(&format!("formatting {name}"))?;
        self.put(name, &buf)
    }

    fn script(&mut self, name: &str, text: Option<String>) -> Result<()> {
        match text {
            Some(t) if self.plot => self.put(name, t.as_bytes()),
            _ => Ok(()),
        }
    }
}

fn table(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let emit = || -> csv::Result<()> {
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    };
    emit().expect("writing CSV to memory cannot fail");
    w.into_inner().expect("CSV buffer is flushed")
}

/// Runs `cmd`, writing outputs and a manifest; `cfg` is updated with every
/// default resolved during the run.
pub fn run(cmd: Command, cfg: &mut ExperimentConfig) -> Result<Vec<String>> {
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Output { path: dir.display().to_string(), source })?;
    let mut sink = Sink { dir: &dir, plot: cfg.output.plot_script, written: Vec::new() };
    let failures = match cmd {
        Command::Levels => levels_cmd(cfg, &mut sink).map(|_| 0)?,
        Command::FieldSweep => field_sweep_cmd(cfg, &mut sink).map(|_| 0)?,
        Command::Endor => endor_cmd(cfg, &mut sink).map(|_| 0)?,
        Command::RabiMap => rabi_map_cmd(cfg, &mut sink).map(|_| 0)?,
        Command::Pbg => pbg_cmd(cfg, &mut sink).map(|_| 0)?,
        Command::Validate => validate_cmd(cfg, &mut sink)?,
    };
    let mut outputs = sink.written.clone();
    outputs.push("manifest.toml".into());
    let manifest = Manifest {
        run: RunInfo { subcommand: cmd.name(), version: env!("CARGO_PKG_VERSION"), outputs: &outputs },
        config: cfg,
    };
    let text = toml::to_string(&manifest).map_err(|e| CliError::Config(format!("cannot serialize manifest: {e}")))?;
    sink.put("manifest.toml", text.as_bytes())?;
    if failures > 0 {
        return Err(CliError::Check(format!("{failures} validation check(s) failed; see validate.csv")));
    }
    Ok(outputs)
}

fn system(cfg: &ExperimentConfig) -> Result<SpinSystem> {
    match &cfg.species_file {
        Some(p) => species::SpeciesTable::load(p)
            .config("species_file")?
            .system(&cfg.species)
            .config("species"),
        None => species::builtin(&cfg.species).config("species"),
    }
}

fn static_field(cfg: &ExperimentConfig) -> Result<StaticField> {
    let [x, y, z] = cfg.field.direction;
    StaticField::along(Vec3::new(x, y, z), cfg.field.b0.si()).config("field")
}

fn drive_model(cfg: &ExperimentConfig) -> Result<DriveModel> {
    match &cfg.drive.coefficients {
        Some(p) => CoefficientFile::load(p).config("drive.coefficients")?.model(&cfg.species).config("drive.coefficients"),
        None => builtin_model(&cfg.species).config("drive coefficients"),
    }
}

fn channel(cfg: &ExperimentConfig) -> Result<RfChannel> {
    Ok(match cfg.drive.channel {
        ChannelKind::Magnetic => RfChannel::magnetic(),
        ChannelKind::Electric => RfChannel::Electric {
            model: drive_model(cfg)?,
            leak: cfg.drive.leakage.map(|f| MagneticLeak::from_fraction(f, cfg.ensemble.eps_eff)),
        },
    })
}

fn setup(cfg: &ExperimentConfig, readout: Option<usize>) -> Result<DaviesSetup> {
    let mut s = DaviesSetup::new(system(cfg)?, static_field(cfg)?, channel(cfg)?);
    s.readout = readout.map_or(ReadoutLine::All, ReadoutLine::Index);
    s.temperature = cfg.temperature.si();
    Ok(s)
}

fn label(l: LevelLabel) -> String {
    format!("{l}")
}

fn levels_cmd(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let sys = system(cfg)?;
    let lv = levels(&sys, &static_field(cfg)?).numerical("diagonalizing the spin Hamiltonian")?;
    let rows = (0..lv.dim())
        .map(|k| {
            vec![k.to_string(), lv.energies[k].to_string(), (lv.labels[k].ms()).to_string(), lv.labels[k].mi().to_string()]
        })
        .collect();
    sink.put("levels.csv", &table(&["index", "energy_mhz", "ms", "mi"], rows))?;

    let ix = transition_table(&lv, &Probe::Ix).numerical("transition table")?;
    let sx = transition_table(&lv, &Probe::Sx).numerical("transition table")?;
    let rows = ix
        .iter()
        .zip(&sx)
        .map(|(t, s)| {
            vec![
                t.level_pair.0.to_string(),
                t.level_pair.1.to_string(),
                label(t.labels.0),
                label(t.labels.1),
                t.class.as_str().to_string(),
                t.frequency.abs().to_string(),
                t.operator_weight.to_string(),
                s.operator_weight.to_string(),
            ]
        })
        .collect();
    sink.put(
        "transitions.csv",
        &table(&["level_a", "level_b", "label_a", "label_b", "class", "frequency_mhz", "weight_ix", "weight_sx"], rows),
    )?;
    sink.script("transitions.gp", Some(plot::transitions()))
}

fn field_sweep_cmd(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let sys = system(cfg)?;
    let fs = &cfg.field_sweep;
    let grid = fs.fields.values();
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if !(hi > lo) {
        return Err(CliError::Config("field_sweep.fields must span a non-empty range".into()));
    }
    let [x, y, z] = cfg.field.direction;
    let dir = Vec3::new(x, y, z).normalize();
    let hits = esr_field_positions(&sys, fs.probe_frequency.si() * 1e-9, (lo, hi), dir).numerical("locating ESR lines")?;
    let mut lines = Vec::with_capacity(hits.len());
    for h in &hits {
        let field = StaticField::along(dir, h.field).numerical("field")?;
        let lv = levels(&sys, &field).numerical("levels at resonance")?;
        let pops = boltzmann_populations(&lv.energies, cfg.temperature.si());
        let (i, j) = h.transition.level_pair;
        let polarization = pops[i] - pops[j];
        lines.push((h.field, h.transition.clone(), polarization, h.transition.operator_weight * polarization));
    }
    let rows = lines
        .iter()
        .map(|(b, t, pol, amp)| {
            vec![b.to_string(), label(t.labels.0), label(t.labels.1), t.frequency.to_string(), t.operator_weight.to_string(), pol.to_string(), amp.to_string()]
        })
        .collect();
    sink.put(
        "field_positions.csv",
        &table(&["field_t", "lower", "upper", "frequency_mhz", "weight_sx", "polarization", "intensity"], rows),
    )?;
    let sigma = fs.linewidth.si();
    let signal = grid
        .iter()
        .map(|&b| lines.iter().map(|(b0, _, _, amp)| amp * (-0.5 * ((b - b0) / sigma).powi(2)).exp()).sum())
        .collect();
    let spectrum = SpectrumResult {
        metadata: vec![
            ("species".into(), sys.label.clone()),
            ("probe_frequency_hz".into(), fs.probe_frequency.si().to_string()),
            ("linewidth_t".into(), sigma.to_string()),
            ("temperature_k".into(), cfg.temperature.si().to_string()),
            ("axis".into(), "field_t".into()),
        ],
        axis: grid,
        signal,
    };
    sink.put_with("field_sweep.csv", |w| spectrum.write_csv(w))?;
    sink.script("field_sweep.gp", Some(plot::spectrum("field_sweep.csv", "B_0 (T)", "echo intensity (arb.)")))
}

fn electric_amplitude(cfg: &ExperimentConfig, given: Option<f64>) -> Result<f64> {
    match given {
        Some(e) => Ok(e),
        None => drive_model(cfg)?.operating_field.ok_or_else(|| {
            CliError::Config(format!("species {} has no operating field; set an electric amplitude", cfg.species))
        }),
    }
}

fn endor_cmd(cfg: &mut ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let s = setup(cfg, cfg.endor.readout_line)?;
    let amplitude = match cfg.drive.channel {
        ChannelKind::Magnetic => cfg.endor.magnetic_amplitude.si(),
        ChannelKind::Electric => {
            let e = electric_amplitude(cfg, cfg.endor.electric_amplitude.map(|q| q.si()))?;
            cfg.endor.electric_amplitude = Some(VoltsPerMeter(e));
            e
        }
    };
    let grid = match &cfg.endor.frequencies {
        Some(g) => g.values(),
        None => {
            let lv = levels(&s.system, &s.field).numerical("levels")?;
            let g = auto_endor_grid(&lv, cfg.drive.channel, cfg.endor.rf_duration.si())?;
            cfg.endor.frequencies = Some(Grid::list(g.iter().map(|&f| Hertz(f)).collect()));
            g
        }
    };
    let spectrum = davies_endor_spectrum(&s, &grid, cfg.endor.rf_duration.si(), amplitude).numerical("ENDOR spectrum")?;
    sink.put_with("endor.csv", |w| spectrum.write_csv(w))?;
    sink.script("endor.gp", Some(plot::spectrum("endor.csv", "RF frequency (Hz)", "ENDOR contrast")))
}

/// Points per window of the automatic ENDOR grid.
const WINDOW_POINTS: usize = 33;

/// Windows of ±4 Fourier widths of the RF pulse around each NMR transition
/// and, for the electric channel, around half of each.
fn auto_endor_grid(lv: &LevelSet, channel: ChannelKind, rf_duration: f64) -> Result<Vec<f64>> {
    let half_width = 4.0 / rf_duration;
    let mut centres = Vec::new();
    for t in transition_table(lv, &Probe::Ix).numerical("transition table")? {
        if matches!(t.class, TransitionClass::NmrSqt | TransitionClass::NmrDqt) {
            let f = t.frequency.abs() * 1e6;
            centres.push(f);
            if channel == ChannelKind::Electric {
                centres.push(f / 2.0);
            }
        }
    }
    let mut grid: Vec<f64> = centres
        .iter()
        .flat_map(|&c| {
            (0..WINDOW_POINTS).map(move |k| c - half_width + 2.0 * half_width * k as f64 / (WINDOW_POINTS - 1) as f64)
        })
        .filter(|&f| f > 0.0)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1.0);
    if grid.is_empty() {
        return Err(CliError::Config("no NMR transitions to build an ENDOR grid around; set endor.frequencies".into()));
    }
    Ok(grid)
}

/// Lowest-frequency NMR single-quantum transition.
fn lowest_sqt(lv: &LevelSet) -> Result<Transition> {
    transition_table(lv, &Probe::Ix)
        .numerical("transition table")?
        .into_iter()
        .filter(|t| t.class == TransitionClass::NmrSqt)
        .min_by(|a, b| a.frequency.abs().total_cmp(&b.frequency.abs()))
        .ok_or_else(|| CliError::Config("species has no NMR transition at this field".into()))
}

fn ensemble(cfg: &ExperimentConfig) -> Result<EnsembleSpec> {
    let e = &cfg.ensemble;
    let source = match &e.field_map {
        Some(p) => FieldSource::Map(FieldMap::load(p).config("ensemble.field_map")?),
        None => FieldSource::Analytic(CpwGeometry {
            center_width: e.center_width.si(),
            gap_width: e.gap_width.si(),
            sample_standoff: e.standoff.si(),
            drive_voltage: e.drive_voltage.si(),
            leakage: cfg.drive.leakage.unwrap_or(CpwGeometry::default().leakage),
            eps_eff: e.eps_eff,
            ..CpwGeometry::default()
        }),
    };
    let profile = match &e.implant_table {
        Some(p) => DepthProfile::Table(ImplantTable::load(p).config("ensemble.implant_table")?),
        None => DepthProfile::Parametric(ImplantProfile::for_species(&cfg.species).config("implant profile")?),
    };
    let lateral = uniform_grid(2.0 * e.gap_width.si(), e.lateral_points);
    let depth = uniform_grid(e.depth.si(), e.depth_points);
    build_ensemble(&source, &profile, &lateral, &depth).config("ensemble")
}

fn rabi_map_cmd(cfg: &mut ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let s = setup(cfg, cfg.rabi_map.readout_line)?;
    let carrier = match cfg.rabi_map.carrier {
        Some(c) => c.si(),
        None => {
            let lv = levels(&s.system, &s.field).numerical("levels")?;
            let f = lowest_sqt(&lv)?.frequency.abs() * 1e6;
            let c = match cfg.drive.channel {
                ChannelKind::Magnetic => f,
                ChannelKind::Electric => f / 2.0,
            };
            cfg.rabi_map.carrier = Some(Hertz(c));
            c
        }
    };
    let durations = cfg.rabi_map.durations.values();
    let amplitudes = match cfg.drive.channel {
        ChannelKind::Magnetic => cfg.rabi_map.magnetic_amplitudes.values(),
        ChannelKind::Electric => cfg.rabi_map.electric_amplitudes.values(),
    };
    let map = if cfg.ensemble.enabled {
        let spec = ensemble(cfg)?;
        let davies = Davies::new(s).numerical("Davies setup")?;
        let columns = amplitudes
            .iter()
            .map(|&a| ensemble_rabi_trace(&davies, &spec, carrier, a, &durations))
            .collect::<ednmr_core::Result<Vec<_>>>()
            .numerical("ensemble Rabi traces")?;
        let signal = (0..durations.len()).map(|r| columns.iter().map(|c| c[r]).collect()).collect();
        RabiMap {
            metadata: vec![
                ("species".into(), davies.setup.system.label.clone()),
                ("b0_t".into(), davies.setup.field.magnitude().to_string()),
                ("channel".into(), davies.setup.channel.name().into()),
                ("carrier_hz".into(), carrier.to_string()),
                ("ensemble_points".into(), spec.points.len().to_string()),
            ],
            durations,
            amplitudes,
            signal,
        }
    } else {
        rabi_map(&s, carrier, &durations, &amplitudes).numerical("Rabi map")?
    };
    sink.put_with("rabi_map.csv", |w| map.write_csv(w))?;
    sink.script("rabi_map.gp", Some(plot::rabi_map("rabi_map.csv", map.amplitudes.len())))
}

fn network(cfg: &ExperimentConfig) -> Result<TransmissionNetwork> {
    match &cfg.pbg.network {
        Some(p) => TransmissionNetwork::load(p).config("pbg.network"),
        None => Ok(TransmissionNetwork::reference_geometry()),
    }
}

fn pbg_cmd(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let net = network(cfg)?;
    let spectrum = sweep_s21(&net, &cfg.pbg.frequencies.values()).numerical("S21 sweep")?;
    sink.put_with("s21.csv", |w| spectrum.write_csv(w))?;
    let (lo, hi) = bandgap_edges(&spectrum, cfg.pbg.gap_threshold_db).numerical("bandgap edges")?;
    let fit = find_resonance(&net, lo, hi).numerical("defect-mode fit")?;
    let centre = 0.5 * (lo + hi);
    let depth = 20.0 * s21(&net, centre).numerical("S21")?.norm().log10();
    let rows = [
        ("gap_low_hz", lo),
        ("gap_high_hz", hi),
        ("gap_fraction", (hi - lo) / centre),
        ("gap_center_s21_db", depth),
        ("resonance_hz", fit.f0),
        ("loaded_q", fit.loaded_q),
        ("q_3db", fit.q_3db),
        ("insertion_loss_db", fit.insertion_loss_db),
    ]
    .iter()
    .map(|(k, v)| vec![k.to_string(), v.to_string()])
    .collect();
    sink.put("pbg_summary.csv", &table(&["quantity", "value"], rows))?;
    sink.script("s21.gp", Some(plot::s21("s21.csv")))
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check { name, pass: false, detail: e.to_string() },
    }
}

/// Closed-form S = I = 1/2 energies (MHz), sorted.
fn breit_rabi(ve: f64, vn: f64, a: f64) -> [f64; 4] {
    let root = 0.5 * ((ve + vn).powi(2) + a * a).sqrt();
    let mut e = [0.5 * (ve - vn) + a / 4.0, -0.5 * (ve - vn) + a / 4.0, -a / 4.0 + root, -a / 4.0 - root];
    e.sort_by(f64::total_cmp);
    e
}

fn validate_cmd(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<usize> {
    let mut checks = Vec::new();
    checks.push(check("breit-rabi", || {
        let k = PhysicalConstants::default();
        let mut worst = 0.0f64;
        for ia in 0..10 {
            for ib in 0..10 {
                let a = 1.0 + 499.0 * ia as f64 / 9.0;
                let b = ib as f64 / 9.0;
                let sys = SpinSystem::isotropic("test", Spin::from_twice(1), 2.0023, a, 2.2632);
                let lv = levels(&sys, &StaticField::along_z(b)).numerical("levels")?;
                let ve = 2.0023 * k.bohr_magneton_over_h * 1e3 * b;
                let vn = 2.2632 * k.nuclear_magneton_over_h * b;
                for (x, y) in lv.energies.iter().zip(breit_rabi(ve, vn, a)) {
                    worst = worst.max((x - y).abs() * 1e6);
                }
            }
        }
        Ok((worst < 1.0, format!("max deviation {worst:.3e} Hz")))
    }));

    let sys = system(cfg)?;
    let field = static_field(cfg)?;
    checks.push(check("hamiltonian", || {
        let h = build_hamiltonian(&sys, &field).numerical("Hamiltonian")?;
        let lv = levels(&sys, &field).numerical("levels")?;
        let residual = (h.trace().re - lv.energies.iter().sum::<f64>()).abs();
        let herm = hermiticity_error(&h);
        Ok((herm < 1e-12 && residual < 1e-6, format!("hermiticity {herm:.1e}, trace residual {residual:.1e} MHz")))
    }));

    let lv = levels(&sys, &field).numerical("levels")?;
    checks.push(check("transition classes", || {
        let t = transition_table(&lv, &Probe::Ix).numerical("transition table")?;
        let sqt: Vec<&Transition> = t.iter().filter(|t| t.class == TransitionClass::NmrSqt).collect();
        let dqt: Vec<&Transition> = t.iter().filter(|t| t.class == TransitionClass::NmrDqt).collect();
        let expected = 2 * sys.nuclear_spin.twice() as usize;
        let max_sqt = sqt.iter().map(|t| t.operator_weight).fold(0.0, f64::max);
        let max_dqt = dqt.iter().map(|t| t.operator_weight).fold(0.0, f64::max);
        let ok = sqt.len() == expected && max_dqt <= 1e-6 * max_sqt;
        Ok((ok, format!("{} SQT (expected {expected}), {} DQT with weight ratio {:.1e}", sqt.len(), dqt.len(), max_dqt / max_sqt)))
    }));

    checks.push(check("dqt additivity", || {
        let mut worst = 0.0f64;
        let t = transition_table(&lv, &Probe::Ix).numerical("transition table")?;
        for d in t.iter().filter(|t| t.class == TransitionClass::NmrDqt) {
            let (a, b) = d.labels;
            let mid = LevelLabel { twice_ms: a.twice_ms, twice_mi: (a.twice_mi + b.twice_mi) / 2 };
            let (i, j, m) = (lv.find(a), lv.find(b), lv.find(mid));
            let (Some(i), Some(j), Some(m)) = (i, j, m) else {
                return Ok((false, "ambiguous level labels".into()));
            };
            worst = worst.max((lv.gap(i, j).abs() - lv.gap(i, m).abs() - lv.gap(m, j).abs()).abs());
        }
        Ok((worst < 1e-9, format!("max deviation {worst:.1e} MHz")))
    }));

    checks.push(check("subharmonic gating", || {
        let model = drive_model(cfg)?.without_quadratic();
        let sqt = transition_table(&lv, &Probe::Ix).numerical("transition table")?;
        let e = model.operating_field.unwrap_or(1e5);
        let mut worst = 0.0f64;
        for t in sqt.iter().filter(|t| t.class == TransitionClass::NmrSqt) {
            let f = t.frequency.abs() * 1e6;
            let h = harmonic_components(&model, &sys, &field, e, f / 2.0).numerical("harmonics")?;
            worst = worst.max(rabi_rate(&lv, &h, t.level_pair, 2, Some(1.0)).numerical("Rabi rate")?);
        }
        Ok((worst == 0.0, format!("largest SQT/2 rate without quadratic response {worst:.1e} Hz")))
    }));

    checks.push(check("thermal state", || {
        let rho = thermal_state(&lv, cfg.temperature.si()).numerical("thermal state")?;
        rho.check(1e-12).numerical("thermal state")?;
        let n = lv.dim();
        let hot = thermal_state(&lv, 1e12).numerical("thermal state")?;
        let mixed = CMat::identity(n, n).map(|z| z / n as f64);
        let dev = (&hot.rho - mixed).iter().map(|z| z.norm()).fold(0.0, f64::max);
        Ok((dev < 1e-9, format!("infinite-temperature deviation {dev:.1e}")))
    }));

    checks.push(check("network passivity", || {
        let net = network(cfg)?;
        let lossless = net.sections.iter().all(|s| s.loss_db_per_m == 0.0);
        let mut worst_det = 0.0f64;
        let mut worst_power = 0.0f64;
        for k in 1..=50 {
            let f = k as f64 * 0.24e9;
            let det = net.cascade(f).numerical("cascade")?.determinant();
            worst_det = worst_det.max((det - 1.0).norm());
            let p = s21(&net, f).numerical("S21")?.norm_sqr() + s11(&net, f).numerical("S11")?.norm_sqr();
            worst_power = worst_power.max(if lossless { (p - 1.0).abs() } else { (p - 1.0).max(0.0) });
        }
        Ok((worst_det < 1e-6 && worst_power < 1e-9, format!("|det - 1| {worst_det:.1e}, power excess {worst_power:.1e}")))
    }));

    checks.push(check("ensemble weights", || {
        let spec = ensemble(cfg)?;
        let total = spec.total_weight();
        Ok(((total - 1.0).abs() < 1e-12, format!("{} points, total weight {total}", spec.points.len())))
    }));

    checks.push(check("config round trip", || {
        let again = ExperimentConfig::parse(&cfg.to_toml()?)?;
        Ok((&again == cfg, "parse(emit(config)) == config".into()))
    }));

    let failures = checks.iter().filter(|c| !c.pass).count();
    let rows = checks
        .iter()
        .map(|c| vec![c.name.to_string(), if c.pass { "pass" } else { "fail" }.to_string(), c.detail.clone()])
        .collect();
    sink.put("validate.csv", &table(&["check", "status", "detail"], rows))?;
    let mut out = std::io::stdout().lock();
    for c in &checks {
        let _ = writeln!(out, "{:<20} {}  {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    Ok(failures)
}
