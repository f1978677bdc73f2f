use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qkdwdm::interference::{channel_crosstalk, check_plan_fwm, required_isolation_db};
use qkdwdm::keyrate::link_budget;
use qkdwdm::montecarlo::{simulate, McMode, McOptions};
use qkdwdm::scenario::{self, compare_bands, length_grid, sweep_length};
use qkdwdm::{Direction, LinkConfig, LinkSetup, Protocol};

mod report;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (config schema 1)");

#[derive(Debug, Parser)]
#[command(name = "qkdwdm", version = VERSION)]
#[command(about = "Noise, QBER and key-rate model for QKD sharing a fibre with DWDM channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Bb84,
    Sarg,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Bb84 => Protocol::Bb84,
            ProtocolArg::Sarg => Protocol::Sarg,
        }
    }
}

#[derive(Debug, Args)]
struct LinkArgs {
    /// Link configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the configured protocol
    #[arg(long, value_enum)]
    protocol: Option<ProtocolArg>,
    /// Put the narrowband filter in front of the detectors (the configured
    /// one, or the default 45 pm filter)
    #[arg(long)]
    filters: bool,
}

impl LinkArgs {
    fn load(&self) -> Result<LinkSetup, CliError> {
        let mut setup = load_setup(&self.config)?;
        if let Some(p) = self.protocol {
            setup = setup.with_protocol(p.into());
        }
        if self.filters {
            setup = setup.with_filters(true);
        }
        Ok(setup)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Link budget at one fibre length
    Budget {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long)]
        length: f64,
    },
    /// Sweep the fibre length and write one CSV row per length
    Sweep {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long)]
        min: f64,
        #[arg(long)]
        max: f64,
        #[arg(long)]
        step: f64,
        /// Output CSV, `-` for stdout
        #[arg(long)]
        out: PathBuf,
    },
    /// Channel plan checks
    Plan {
        #[command(subcommand)]
        command: PlanCommand,
    },
    /// Monte Carlo detection run compared with the closed-form model
    Mc {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long)]
        length: f64,
        #[arg(long)]
        gates: u64,
        #[arg(long)]
        seed: u64,
        /// Worker threads; results do not depend on it
        #[arg(long, default_value_t = 1)]
        chunks: usize,
        /// Independent Poisson sources per gate instead of the matched model
        #[arg(long)]
        poisson: bool,
        /// Append the result as a CSV row to this file
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sweep a 1550 nm and a 1310 nm configuration side by side
    CompareBands {
        #[arg(long)]
        config1550: PathBuf,
        #[arg(long)]
        config1310: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        min: f64,
        #[arg(long, default_value_t = 100.0)]
        max: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
    },
    /// Scale the Raman cross-section to reproduce an observed QBER
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        /// Observed QBER as a fraction (0.0453 for 4.53 %)
        #[arg(long)]
        qber: f64,
        #[arg(long)]
        length: f64,
        /// Where to write the calibrated configuration
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a built-in configuration
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(scenario::PRESET_NAMES))]
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum PlanCommand {
    /// Four-wave-mixing and crosstalk check; exits 1 on an FWM violation
    Check {
        #[arg(long)]
        config: PathBuf,
        /// Length for the nonlinear phase estimate (defaults to the config's)
        #[arg(long)]
        length: Option<f64>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Config(e) | CliError::Runtime(e) => f.write_str(&chain(e)),
        }
    }
}

impl From<qkdwdm::Error> for CliError {
    fn from(e: qkdwdm::Error) -> Self {
        match e {
            qkdwdm::Error::Unbracketable(_) => CliError::Usage(e.to_string()),
            e if e.is_config_error() => CliError::Config(e.into()),
            // the model cannot be evaluated for this configuration
            e @ (qkdwdm::Error::OutOfRange { .. } | qkdwdm::Error::Domain(_) | qkdwdm::Error::NoDetections) => {
                CliError::Config(e.into())
            }
            e => CliError::Runtime(e.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

/// Error chain joined by `: `, skipping causes already quoted by their parent.
fn chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !prev.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
        prev = msg;
    }
    out
}

fn load_setup(path: &Path) -> Result<LinkSetup, CliError> {
    LinkSetup::load(path)
        .with_context(|| format!("loading {}", path.display()))
        .map_err(CliError::Config)
}

fn check_length(length: f64) -> Result<(), CliError> {
    if length.is_finite() && length >= 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--length must be a finite value >= 0, got {length}")))
    }
}

fn grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>, CliError> {
    length_grid(min, max, step).map_err(|e| match e {
        qkdwdm::Error::Domain(m) => CliError::Usage(m),
        e => CliError::Usage(e.to_string()),
    })
}

fn open_out(path: &Path) -> Result<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdout().lock()));
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Budget { link, length } => {
            check_length(length)?;
            let setup = link.load()?;
            let b = link_budget(&setup, length)?;
            print!("{}", report::budget(&b));
        }
        Command::Sweep {
            link,
            min,
            max,
            step,
            out,
        } => {
            let lengths = grid(min, max, step)?;
            let setup = link.load()?;
            let rows = sweep_length(&setup, &lengths)?;
            let w = open_out(&out)?;
            scenario::write_budget_csv(w, &rows)?;
            if out != Path::new("-") {
                eprintln!("wrote {} rows to {}", rows.len(), out.display());
            }
        }
        Command::Plan {
            command: PlanCommand::Check { config, length },
        } => {
            let setup = load_setup(&config)?;
            let cfg = &setup.config;
            let length = length.unwrap_or(cfg.fibre.length_km);
            check_length(length)?;
            let fwm = check_plan_fwm(cfg, length);
            let crosstalk: Vec<_> = cfg.plan.channels.iter().map(|ch| channel_crosstalk(cfg, ch)).collect();
            let needed = cfg
                .plan
                .channels
                .iter()
                .filter(|ch| ch.direction == Direction::TowardBob)
                .map(|ch| {
                    required_isolation_db(
                        ch.fibre_output_power_dbm(&cfg.plan),
                        cfg.plan.channel_wavelength_nm(ch),
                        cfg.detector.dark_count_prob_per_ns,
                        cfg.detector.efficiency,
                        cfg.protocol.bob_internal_loss_db,
                        1.0,
                    )
                })
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
            print!("{}", report::plan(cfg, length, &fwm, &crosstalk, needed));
            if !fwm.violations.is_empty() {
                return Err(CliError::Runtime(anyhow::anyhow!(
                    "{} FWM product(s) inside the quantum passband",
                    fwm.violations.len()
                )));
            }
        }
        Command::Mc {
            link,
            length,
            gates,
            seed,
            chunks,
            poisson,
            csv,
        } => {
            check_length(length)?;
            if gates == 0 {
                return Err(CliError::Usage("--gates must be at least 1".into()));
            }
            let setup = link.load()?;
            let analytic = link_budget(&setup, length)?;
            let opts = McOptions {
                mode: if poisson { McMode::Poisson } else { McMode::Matched },
                chunks,
                dead_time: true,
            };
            let mc = simulate(&setup, length, gates, seed, &opts)?;
            print!("{}", report::monte_carlo(&analytic, &mc, seed, opts.mode));
            if let Some(path) = csv {
                report::append_mc_csv(&path, &analytic, &mc, seed)?;
            }
        }
        Command::CompareBands {
            config1550,
            config1310,
            out,
            min,
            max,
            step,
        } => {
            let lengths = grid(min, max, step)?;
            let c = load_setup(&config1550)?;
            let o = load_setup(&config1310)?;
            let cmp = compare_bands(&c, &o, &lengths)?;
            scenario::write_band_csv(open_out(&out)?, &cmp)?;
            print!("{}", report::bands(&cmp));
        }
        Command::Calibrate {
            config,
            qber,
            length,
            out,
        } => {
            check_length(length)?;
            if !(qber > 0.0 && qber < 0.5) {
                return Err(CliError::Usage(format!("--qber must lie in (0, 0.5), got {qber}")));
            }
            let setup = load_setup(&config)?;
            let s = scenario::calibrate_rho(&setup, qber, length)?;
            let mut cfg: LinkConfig = setup.config.clone();
            cfg.raman_scale *= s;
            cfg.save(&out).context("writing calibrated config")?;
            println!("scale factor: {s:.9}");
            println!("raman_scale:  {:.9}", cfg.raman_scale);
            println!("wrote {}", out.display());
        }
        Command::Preset { name, out } => {
            let cfg = scenario::preset(&name)?;
            cfg.save(&out).context("writing preset")?;
            eprintln!("wrote preset {name} to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            if e.use_stderr() {
                let msg = e.to_string();
                let msg = msg.strip_prefix("error: ").unwrap_or(&msg);
                eprint!("error: {msg}");
            } else {
                let _ = e.print();
            }
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
