use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;
mod settings;

use config::ConfigFile;
use settings::{parse_duration, parse_power, Settings};

/// Simulation harness for a die-level balanced homodyne receiver.
#[derive(Parser, Debug)]
#[command(name = "bhdtwin", version)]
struct Cli {
    /// `key = value` parameter file.
    #[arg(long, global = true, env = "BHDTWIN_CONFIG")]
    config: Option<PathBuf>,

    /// Seed for every random draw of the run.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Primary output file; companion files are written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// CMRR against frequency.
    Cmrr(CmrrArgs),
    /// Clearance spectra and QCNR per LO power.
    Qcnr(QcnrArgs),
    /// Single-tone linearity sweep and dynamic range.
    Linearity(LinearityArgs),
    /// QPSK BER sweep, sensitivity and constellation.
    Qpsk(QpskArgs),
    /// CV-QKD secret-key rate against distance.
    Skr(SkrArgs),
    /// Fit the model parameters to anchor values.
    Calibrate(CalibrateArgs),
}

#[derive(Args, Debug)]
struct CmrrArgs {
    /// Relative responsivity deficit of the second photodiode.
    #[arg(long)]
    mismatch: Option<f64>,
    /// Differential arm delay, e.g. `10ps`.
    #[arg(long)]
    skew: Option<String>,
    #[arg(long)]
    f_min: Option<f64>,
    #[arg(long)]
    f_max: Option<f64>,
    #[arg(long)]
    f_step: Option<f64>,
}

#[derive(Args, Debug)]
struct QcnrArgs {
    /// Comma-separated LO powers in dBm; `-inf` gives a dark row.
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<String>,
    #[arg(long)]
    band_lo: Option<f64>,
    #[arg(long)]
    band_hi: Option<f64>,
    /// Analysis band of the simulated capture, Hz.
    #[arg(long)]
    capture_band: Option<f64>,
    /// Normalisation of the electronic noise: `input` or `received`.
    #[arg(long)]
    noise_reference: Option<String>,
}

#[derive(Args, Debug)]
struct LinearityArgs {
    /// LO power, e.g. `1mW` or `-10dBm`.
    #[arg(long, allow_hyphen_values = true)]
    p_lo: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    p_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    p_max: Option<f64>,
    #[arg(long)]
    p_step: Option<f64>,
}

#[derive(Args, Debug)]
struct QpskArgs {
    /// Disable all receiver noise.
    #[arg(long)]
    no_noise: bool,
    #[arg(long)]
    target_ber: Option<f64>,
    #[arg(long)]
    bit_cap: Option<String>,
    #[arg(long)]
    n_symbols: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    p_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    p_max: Option<f64>,
    #[arg(long)]
    p_step: Option<f64>,
    /// Launch power for the optical budget, dBm.
    #[arg(long, allow_hyphen_values = true)]
    launch: Option<f64>,
    /// LO power, e.g. `13dBm`.
    #[arg(long, allow_hyphen_values = true)]
    p_lo: Option<String>,
    /// Back-end noise density, A²/Hz.
    #[arg(long)]
    backend_noise_psd: Option<f64>,
}

#[derive(Args, Debug)]
struct SkrArgs {
    /// Comma-separated channel excess noise values, SNU.
    #[arg(long)]
    zeta: Option<String>,
    #[arg(long)]
    d_max: Option<f64>,
    #[arg(long)]
    d_step: Option<f64>,
    /// Key rate at which the reach is read, b/s.
    #[arg(long)]
    floor: Option<f64>,
    /// `fiber` or `fiber+detection`.
    #[arg(long)]
    noise_plane: Option<String>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// `anchor.* = value` file; the reference anchor set when absent.
    #[arg(long)]
    anchors: Option<PathBuf>,
}

fn push<T: ToString>(v: &mut Vec<(&'static str, String)>, key: &'static str, x: &Option<T>) {
    if let Some(x) = x {
        v.push((key, x.to_string()));
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Cmrr(_) => "cmrr",
            Command::Qcnr(_) => "qcnr",
            Command::Linearity(_) => "linearity",
            Command::Qpsk(_) => "qpsk",
            Command::Skr(_) => "skr",
            Command::Calibrate(_) => "calibrate",
        }
    }

    fn default_out(&self) -> PathBuf {
        match self {
            Command::Calibrate(_) => PathBuf::from("calibrated.conf"),
            c => PathBuf::from(format!("{}.csv", c.name())),
        }
    }

    /// Command-line settings as config keys.
    fn overrides(&self) -> Result<Vec<(&'static str, String)>> {
        let mut v = Vec::new();
        match self {
            Command::Cmrr(a) => {
                push(&mut v, "receiver.arm_responsivity_mismatch", &a.mismatch);
                if let Some(s) = &a.skew {
                    v.push(("receiver.arm_skew", parse_duration(s).context("--skew")?.to_string()));
                }
                push(&mut v, "cmrr.f_min", &a.f_min);
                push(&mut v, "cmrr.f_max", &a.f_max);
                push(&mut v, "cmrr.f_step", &a.f_step);
            }
            Command::Qcnr(a) => {
                push(&mut v, "qcnr.lo_dbm", &a.lo);
                push(&mut v, "qcnr.band_lo", &a.band_lo);
                push(&mut v, "qcnr.band_hi", &a.band_hi);
                push(&mut v, "capture.analysis_band", &a.capture_band);
                push(&mut v, "receiver.noise_reference", &a.noise_reference);
            }
            Command::Linearity(a) => {
                if let Some(p) = &a.p_lo {
                    v.push(("linearity.p_lo_dbm", parse_power(p).context("--p-lo")?.to_dbm().0.to_string()));
                }
                push(&mut v, "linearity.p_sig_min_dbm", &a.p_min);
                push(&mut v, "linearity.p_sig_max_dbm", &a.p_max);
                push(&mut v, "linearity.p_sig_step_db", &a.p_step);
            }
            Command::Qpsk(a) => {
                if a.no_noise {
                    v.push(("qpsk.noise_enabled", "false".into()));
                }
                push(&mut v, "qpsk.target_ber", &a.target_ber);
                push(&mut v, "qpsk.bit_cap", &a.bit_cap);
                push(&mut v, "qpsk.n_symbols", &a.n_symbols);
                push(&mut v, "qpsk.p_sig_min_dbm", &a.p_min);
                push(&mut v, "qpsk.p_sig_max_dbm", &a.p_max);
                push(&mut v, "qpsk.p_sig_step_db", &a.p_step);
                push(&mut v, "qpsk.launch_power_dbm", &a.launch);
                if let Some(p) = &a.p_lo {
                    v.push(("qpsk.p_lo_dbm", parse_power(p).context("--p-lo")?.to_dbm().0.to_string()));
                }
                push(&mut v, "qpsk.backend_noise_psd", &a.backend_noise_psd);
            }
            Command::Skr(a) => {
                push(&mut v, "qkd.zeta", &a.zeta);
                push(&mut v, "qkd.distance_max", &a.d_max);
                push(&mut v, "qkd.distance_step", &a.d_step);
                push(&mut v, "qkd.skr_floor", &a.floor);
                push(&mut v, "qkd.noise_plane", &a.noise_plane);
            }
            Command::Calibrate(_) => {}
        }
        Ok(v)
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = cli.config.as_deref().map(ConfigFile::load).transpose()?;
    let settings = Settings::resolve(file.as_ref(), &cli.command.overrides()?)?;
    let out = cli.out.clone().unwrap_or_else(|| cli.command.default_out());
    let name = cli.command.name();
    let (outcome, reported) = match &cli.command {
        Command::Cmrr(_) => (commands::cmrr(&settings, &out)?, settings),
        Command::Qcnr(_) => (commands::qcnr(&settings, cli.seed, &out)?, settings),
        Command::Linearity(_) => (commands::linearity(&settings, cli.seed, &out)?, settings),
        Command::Qpsk(_) => (commands::qpsk(&settings, cli.seed, &out)?, settings),
        Command::Skr(_) => (commands::skr(&settings, &out)?, settings),
        Command::Calibrate(a) => {
            let anchors = match &a.anchors {
                Some(path) => commands::load_anchors(&ConfigFile::load(path)?)?,
                None => bhdtwin::Anchors::reference(),
            };
            commands::calibrate_cmd(&settings, &anchors, &out)?
        }
    };
    let report = output::write_report(&out, name, cli.seed, &reported, &outcome.outputs, &outcome.notes)?;
    for path in outcome.outputs.iter().chain([&report]) {
        println!("wrote {}", path.display());
    }
    for (k, v) in &outcome.notes {
        println!("{k}: {v}");
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
