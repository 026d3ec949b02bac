//! Command-line front end: a JSON design document in, formatted reports out.

pub mod commands;
pub mod config;
pub mod error;
pub mod render;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use commands::{Format, SimOverrides};
pub use config::DesignConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "nidesign", version, about = "Design and evaluate active-controlled non-inferiority trials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON design document.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// text, markdown, csv or json.
    #[arg(long, global = true, default_value = "text")]
    pub format: Format,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Master seed for `simulate`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Replications for `simulate`.
    #[arg(long, global = true)]
    pub reps: Option<u64>,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum Command {
    /// Margin, events, sample size and power for every method and criterion.
    Design,
    /// Power and type-I error over a grid of λ₀ at a fixed precision.
    Oc,
    /// Maximum unconditional power over a grid of design-alternative PEs.
    PowerCurve,
    /// Monte Carlo check of rejection rates against the closed forms.
    Simulate,
}

pub fn load_config(path: &Path) -> Result<DesignConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    DesignConfig::from_json(&text)
}

/// Runs a command against a parsed configuration and returns the report.
pub fn run_config(
    command: Command,
    config: &DesignConfig,
    format: Format,
    overrides: SimOverrides,
) -> Result<String, CliError> {
    let r = config.resolve()?;
    match command {
        Command::Design => commands::design(&r, format),
        Command::Oc => commands::oc(&r, format),
        Command::PowerCurve => commands::power_curve(&r, format),
        Command::Simulate => commands::simulate(&r, format, overrides),
    }
}

pub fn run(cli: &Cli) -> Result<String, CliError> {
    let path = cli.config.as_deref().ok_or_else(|| CliError::config("--config", "a configuration file is required"))?;
    let config = load_config(path)?;
    run_config(cli.command, &config, cli.format, SimOverrides { seed: cli.seed, reps: cli.reps })
}
