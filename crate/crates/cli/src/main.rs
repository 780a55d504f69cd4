//! `kerrkit` command-line front end.
//!
//! Exit status is 0 on success, 1 when a computation fails and 2 for usage,
//! configuration or input errors. Every failure prints one JSON record on
//! stderr followed by a human-readable line.

mod commands;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kerrkit::config::{ConfigError, RunConfig};
use kerrkit::netlist::Topology;
use serde_json::json;
use thiserror::Error;

use output::{Output, RunInfo};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Compute(String),
    #[error("writing output: {0}")]
    Output(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Input(_) => "input",
            CliError::Compute(_) => "computation",
            CliError::Output(_) => "output",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Compute(_) | CliError::Output(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kerrkit", version, about = "Kerr prediction, harmonic-balance amplifier simulation and resonance fitting")]
struct Cli {
    /// Directory receiving JSON, CSV and Touchstone outputs plus a manifest.
    #[arg(long, global = true, env = "KERRKIT_OUT_DIR")]
    out: Option<PathBuf>,
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Progress messages on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Device label, required when the config defines several.
    #[arg(long)]
    device: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TopologyArg {
    Reflection,
    Hanger,
}

impl From<TopologyArg> for Topology {
    fn from(t: TopologyArg) -> Self {
        match t {
            TopologyArg::Reflection => Topology::Reflection,
            TopologyArg::Hanger => Topology::Hanger,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Series-RLC extraction, participation, charging energy and Kerr per device.
    Predict(ConfigArgs),
    /// Duffing steady states and bifurcation threshold for a [mode] and [drive].
    Calibrate(ConfigArgs),
    /// Kerr coefficient from Stark-shift data (CSV columns n_bar, delta_f_hz).
    KerrFit {
        #[arg(long)]
        input: PathBuf,
        /// Config with a [mode] section, used with --below-bifurcation.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Keep points below this fraction of the critical photon number.
        #[arg(long)]
        below_bifurcation: Option<f64>,
        #[arg(long, default_value = "n_bar")]
        x_column: String,
        #[arg(long, default_value = "delta_f_hz")]
        y_column: String,
        /// Bootstrap resamples for the Kerr uncertainty.
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Kerr coefficient from a measured third-order intercept.
    KerrIip3 {
        #[arg(long)]
        f0_ghz: f64,
        #[arg(long)]
        kappa_mhz: f64,
        #[arg(long, allow_hyphen_values = true)]
        iip3_dbm: f64,
    },
    /// Series-RLC extraction with junction impedance and linear response files.
    Bbq(ConfigArgs),
    /// Small-signal gain over the configured pump grid.
    GainMap(ConfigArgs),
    /// 1 dB compression point at the configured pump condition.
    P1db(ConfigArgs),
    /// Two-tone third-order intercept.
    Iip3(ConfigArgs),
    /// Pump tuning and compression for each [[compare.branch]].
    Compare(ConfigArgs),
    /// Resonance fit of a Touchstone (.s1p/.s2p) or CSV trace.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        topology: Option<TopologyArg>,
        #[arg(long)]
        start_ghz: Option<f64>,
        #[arg(long)]
        stop_ghz: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Predict(_) => "predict",
            Command::Calibrate(_) => "calibrate",
            Command::KerrFit { .. } => "kerr-fit",
            Command::KerrIip3 { .. } => "kerr-iip3",
            Command::Bbq(_) => "bbq",
            Command::GainMap(_) => "gain-map",
            Command::P1db(_) => "p1db",
            Command::Iip3(_) => "iip3",
            Command::Compare(_) => "compare",
            Command::Fit { .. } => "fit",
        }
    }
}

struct LoadedConfig {
    config: RunConfig,
    sha256: String,
}

fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| CliError::Input(format!("{}: not UTF-8", path.display())))?;
    let config = RunConfig::from_toml_str(text)?;
    Ok(LoadedConfig { config, sha256: output::sha256_hex(&bytes) })
}

fn report_error(e: &CliError) {
    let record = json!({
        "status": "error",
        "kind": e.kind(),
        "exit_code": e.exit_code(),
        "message": e.to_string(),
    });
    eprintln!("{record}");
    eprintln!("kerrkit: {} error: {e}", e.kind());
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let name = cli.command.name();
    let mut loaded: Option<LoadedConfig> = None;
    let mut seed = None;
    let out: Output = match &cli.command {
        Command::Predict(a)
        | Command::Calibrate(a)
        | Command::Bbq(a)
        | Command::GainMap(a)
        | Command::P1db(a)
        | Command::Iip3(a)
        | Command::Compare(a) => {
            let l = loaded.insert(load_config(&a.config)?);
            let cfg = &l.config;
            let label = a.device.as_deref();
            if cli.verbose > 0 || cfg.output.verbosity > 0 {
                eprintln!("kerrkit {name}: config {} ({})", a.config.display(), l.sha256);
            }
            match &cli.command {
                Command::Predict(_) => commands::predict(cfg, label)?,
                Command::Calibrate(_) => commands::calibrate(cfg)?,
                Command::Bbq(_) => commands::bbq(cfg, label)?,
                Command::GainMap(_) => commands::gain_map(cfg, label)?,
                Command::P1db(_) => commands::p1db(cfg, label)?,
                Command::Iip3(_) => commands::iip3(cfg, label)?,
                _ => commands::compare(cfg)?,
            }
        }
        Command::KerrFit { input, config, below_bifurcation, x_column, y_column, bootstrap, seed: s } => {
            if let Some(p) = config {
                loaded = Some(load_config(p)?);
            }
            if *bootstrap > 0 {
                seed = Some(*s);
            }
            commands::kerr_fit(
                loaded.as_ref().map(|l| &l.config),
                &commands::KerrFitOptions {
                    input,
                    x_column,
                    y_column,
                    below_bifurcation: *below_bifurcation,
                    bootstrap: *bootstrap,
                    seed: *s,
                },
            )?
        }
        Command::KerrIip3 { f0_ghz, kappa_mhz, iip3_dbm } => {
            commands::kerr_iip3(*f0_ghz, *kappa_mhz, *iip3_dbm)?
        }
        Command::Fit { input, topology, start_ghz, stop_ghz } => commands::fit(&commands::FitOptions {
            input,
            topology: topology.map(Into::into),
            start_ghz: *start_ghz,
            stop_ghz: *stop_ghz,
        })?,
    };
    let out_dir = cli
        .out
        .clone()
        .or_else(|| loaded.as_ref().and_then(|l| l.config.output.dir.as_ref().map(PathBuf::from)));
    if let Some(dir) = out_dir {
        let info = RunInfo {
            command: name,
            config_sha256: loaded.as_ref().map(|l| l.sha256.clone()),
            seed,
            jobs: cli.jobs,
        };
        let written = output::write_artifacts(&dir, &out.artifacts, &info)
            .map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
        if cli.verbose > 0 {
            for p in written {
                eprintln!("kerrkit {name}: wrote {}", p.display());
            }
        }
    }
    {
        use std::io::Write;
        let text = serde_json::to_string_pretty(&out.summary).expect("JSON values always serialize");
        let _ = writeln!(std::io::stdout().lock(), "{text}");
    }
    if !out.partial_failures.is_empty() {
        return Err(CliError::Compute(out.partial_failures.join("; ")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError::Usage(e.to_string().lines().next().unwrap_or("").to_string());
            report_error(&err);
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(&e);
            ExitCode::from(e.exit_code())
        }
    }
}
