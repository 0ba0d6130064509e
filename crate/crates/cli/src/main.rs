//! kipa-lab: design, simulate and calibrate kinetic-inductance parametric
//! amplifiers from the command line.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kipa_core::Error;

use crate::commands::Context;
use crate::config::RunConfig;
use crate::report::{emit, Format, ReportBundle};

#[derive(Debug, Parser)]
#[command(name = "kipa-lab", version, about = "Kinetic-inductance parametric amplifier toolkit")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for `<command>.json` / `<command>.csv`; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for synthetic noise (ChaCha20).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Generate a seeded plant-and-recover dataset instead of reading data.
    #[arg(long, global = true)]
    synthetic: bool,
    /// Sweep CSV with an `x,y[,sigma_y]` header.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Coupling of the stepped-impedance mirrors: Z_eff, Q_c and κ.
    Design,
    /// Resonance against dc bias, or a fit of the tuning law.
    Tune {
        /// Bias currents in A (comma separated).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        current: Vec<f64>,
    },
    /// Gain curve and gain-bandwidth product, or a fit of a measured curve.
    Gain,
    /// Pump frequency and power reaching the target gain.
    PumpSearch,
    /// 1 dB compression point and output saturation power.
    Compression {
        #[arg(long, allow_hyphen_values = true)]
        p_in_1db_dbm: Option<f64>,
    },
    /// Added noise and amplifier noise temperature from a VTS sweep.
    NoiseFit,
    /// HEMT noise temperature from a VTS sweep through a 50 Ω through.
    HemtFit,
    /// Photon number after each stage of the receiver chain.
    ChainPropagate,
    /// Squeezing floor and quadrature gain from a measured S.
    Squeeze {
        #[arg(long)]
        s_measured: Option<f64>,
    },
    /// Resonance shift in a parallel field, or a fit of measured shifts.
    FieldShift,
    /// Resonance shift against temperature.
    TempShift,
    /// Device temperature from a measured relative shift.
    DeviceTemp {
        #[arg(long, allow_hyphen_values = true)]
        shift: Option<f64>,
    },
    /// Reference check by fixture id, or `all`.
    Reproduce { fixture: String },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Design => "design",
            Command::Tune { .. } => "tune",
            Command::Gain => "gain",
            Command::PumpSearch => "pump-search",
            Command::Compression { .. } => "compression",
            Command::NoiseFit => "noise-fit",
            Command::HemtFit => "hemt-fit",
            Command::ChainPropagate => "chain-propagate",
            Command::Squeeze { .. } => "squeeze",
            Command::FieldShift => "field-shift",
            Command::TempShift => "temp-shift",
            Command::DeviceTemp { .. } => "device-temp",
            Command::Reproduce { .. } => "reproduce",
        }
    }
}

/// 2 configuration or I/O, 3 fit or extraction, 4 model domain.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
        Error::Rank(_) | Error::Fit(_) | Error::Extraction(_) | Error::SearchFailed(_) | Error::Inversion(_) => 3,
        Error::Domain(_) | Error::Divergence { .. } | Error::Singularity(_) | Error::SelfOscillation { .. } => 4,
    }
}

/// A closed downstream pipe, as with `| head`.
fn is_broken_pipe(e: &Error) -> bool {
    let io = match e {
        Error::Io(e) => Some(e),
        Error::Csv(e) => match e.kind() {
            csv::ErrorKind::Io(e) => Some(e),
            _ => None,
        },
        _ => None,
    };
    io.is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}

fn run(cli: Cli) -> kipa_core::Result<bool> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let ctx = Context { config, seed, synthetic: cli.synthetic, data: cli.data.clone() };
    log::info!("running {} with seed {seed}", cli.command.name());
    let out = match &cli.command {
        Command::Design => commands::design(&ctx),
        Command::Tune { current } => commands::tune(&ctx, current),
        Command::Gain => commands::gain(&ctx),
        Command::PumpSearch => commands::pump_search(&ctx),
        Command::Compression { p_in_1db_dbm } => commands::compression(&ctx, *p_in_1db_dbm),
        Command::NoiseFit => commands::noise_fit(&ctx),
        Command::HemtFit => commands::hemt_fit(&ctx),
        Command::ChainPropagate => commands::chain_propagate(&ctx),
        Command::Squeeze { s_measured } => commands::squeeze(&ctx, *s_measured),
        Command::FieldShift => commands::field_shift(&ctx),
        Command::TempShift => commands::temp_shift(&ctx),
        Command::DeviceTemp { shift } => commands::device_temp(&ctx, *shift),
        Command::Reproduce { fixture } => commands::reproduce(&ctx, fixture),
    }?;
    for w in &out.warnings {
        log::warn!("{w}");
    }
    let bundle = ReportBundle::new(cli.command.name(), out.inputs, out.results, out.warnings);
    emit(&bundle, out.table.as_ref(), cli.format, cli.out.as_deref())?;
    Ok(out.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KIPA_LAB_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
