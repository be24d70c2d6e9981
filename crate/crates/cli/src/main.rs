//! Command-line front end: config ingestion, scenario execution and
//! CSV/plot-data emission.
//!
//! Exit codes: 0 success, 1 runtime or validation failure, 2 config error,
//! 3 saturation warning present (rates still emitted). Worker count comes
//! from `KEYMUX_WORKERS` (default: all available cores).

// config validation negates comparisons on purpose: `!(x > 0.0)` also
// rejects NaN, which `x <= 0.0` lets through
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use commands::{CommandOutput, DumpFormat, EXIT_CONFIG, EXIT_FAILURE};
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "keymux",
    version,
    about = "Secure-key-rate engine for wavelength-multiplexed entangled-photon QKD"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Per-channel rate table at the configured pump power.
    Rates {
        #[command(flatten)]
        common: Common,
    },
    /// Total key rate swept over pump power (plot-ready CSV).
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Monte-Carlo-versus-analytics validation grid, pass/fail per cell.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Fully-connected network plan over the per-channel rates.
    Network {
        #[command(flatten)]
        common: Common,
    },
    /// Time-tag stream dump from the event simulator.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Dump format.
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Rates { common }
            | Command::Sweep { common }
            | Command::Validate { common }
            | Command::Network { common }
            | Command::Simulate { common, .. } => common,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Binary,
}

fn main() -> ExitCode {
    init_workers();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            // every configuration-stage failure carries a "config" context
            let code = if err.to_string().starts_with("config") { EXIT_CONFIG } else { EXIT_FAILURE };
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let common = cli.command.common();
    let text = std::fs::read_to_string(&common.config)
        .with_context(|| format!("config: cannot read {}", common.config.display()))?;
    let hash = short_hash(&text);
    let run_config = RunConfig::parse(&text)?;
    let base_dir =
        common.config.parent().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));

    let output: CommandOutput = match &cli.command {
        Command::Rates { .. } => {
            let scenario = run_config.scenario(&base_dir)?;
            commands::cmd_rates(&scenario, &hash)?
        }
        Command::Sweep { .. } => {
            let scenario = run_config.scenario(&base_dir)?;
            commands::cmd_sweep(&scenario, &hash)?
        }
        Command::Validate { .. } => commands::cmd_validate(&run_config, common.seed, &hash)?,
        Command::Network { .. } => {
            let scenario = run_config.scenario(&base_dir)?;
            commands::cmd_network(&run_config, &scenario, &hash)?
        }
        Command::Simulate { format, .. } => {
            let format = match format {
                Format::Csv => DumpFormat::Csv,
                Format::Binary => DumpFormat::Binary,
            };
            commands::cmd_simulate(&run_config, common.seed, format, &hash)?
        }
    };

    match &common.out {
        Some(path) => std::fs::write(path, &output.bytes)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            // a closed pipe (e.g. piping into head) is not an error
            if let Err(e) = lock.write_all(&output.bytes).and_then(|_| lock.flush()) {
                if e.kind() == std::io::ErrorKind::BrokenPipe {
                    return Ok(output.exit);
                }
                return Err(e.into());
            }
        }
    }
    Ok(output.exit)
}

fn short_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn init_workers() {
    if let Ok(v) = std::env::var("KEYMUX_WORKERS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
