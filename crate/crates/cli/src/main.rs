use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use ednmr_cli::config::ChannelKind;
use ednmr_cli::units::Tesla;
use ednmr_cli::{run, CliError, Command, ExperimentConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

/// Simulator for electrically driven NMR of donors in silicon.
#[derive(Parser)]
#[command(name = "ednmr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file; looked up in the config directory if not found.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Default configuration directory.
    #[arg(long, global = true, env = "EDNMR_CONFIG_DIR", hide_env_values = true)]
    config_dir: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Donor species (P, As, Bi).
    #[arg(long, global = true)]
    species: Option<String>,

    /// Static field, in T unless a unit is given (e.g. "250 mT").
    #[arg(long, global = true, value_parser = parse_b0)]
    b0: Option<Tesla>,

    #[arg(long, global = true)]
    channel: Option<ChannelKind>,

    /// Worker threads for grid evaluation; outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, default_value = "csv")]
    format: Format,

    /// Also write gnuplot scripts.
    #[arg(long, global = true)]
    plot: bool,
}

fn parse_b0(s: &str) -> Result<Tesla, String> {
    match s.trim().parse::<f64>() {
        Ok(v) => Ok(Tesla(v)),
        Err(_) => s.parse::<Tesla>().map_err(|e| e.to_string()),
    }
}

fn locate(path: &Path, dir: Option<&Path>) -> Result<PathBuf, CliError> {
    if path.is_file() {
        return Ok(path.to_path_buf());
    }
    if let Some(d) = dir.filter(|_| path.is_relative()) {
        for candidate in [d.join(path), d.join(path).with_extension("toml")] {
            if candidate.is_file() {
                return Ok(candidate);
            }
        }
    }
    Err(CliError::Config(format!("configuration file {} not found", path.display())))
}

fn configure(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let dir = cli.config_dir.as_deref();
    let mut cfg = match (&cli.config, dir) {
        (Some(p), _) => ExperimentConfig::load(&locate(p, dir)?)?,
        (None, Some(d)) if d.join("default.toml").is_file() => ExperimentConfig::load(&d.join("default.toml"))?,
        _ => ExperimentConfig::default(),
    };
    if let Some(s) = &cli.species {
        cfg.species = s.clone();
    }
    if let Some(b) = cli.b0 {
        cfg.field.b0 = b;
    }
    if let Some(c) = cli.channel {
        cfg.drive.channel = c;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    cfg.output.plot_script |= cli.plot;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let Format::Csv = cli.format;
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("ednmr: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = configure(&cli).and_then(|mut cfg| run(cli.command, &mut cfg).map(|files| (cfg, files)));
    match result {
        Ok((cfg, files)) => {
            for f in files {
                println!("{}", cfg.output.dir.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ednmr: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
