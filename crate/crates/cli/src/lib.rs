//! Command-line front end: each subcommand reads its inputs, calls into
//! `plateau`, renders a plain-text report and optionally writes artifacts to
//! an output directory.

mod commands;
mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use commands::{check_coercivity, legendre_roundtrip, linearize, mse_residual, solve_junction};
pub use config::{load_junction, load_solve_config, RunConfig, SolveConfig};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "plateau",
    version,
    about = "Weighted minimal-surface junction toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Directory for output files; without it only the report is printed.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for every randomized step (default 42).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the command's main tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Number of frequency samples for the symbol checks.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Ellipticity and complementing-condition check of a system file.
    CheckCoercivity { system: PathBuf },
    /// Principal linearization of a junction data file (TOML).
    Linearize { junction: PathBuf },
    /// Minimizes weighted area for a junction config (TOML).
    SolveJunction { config: PathBuf },
    /// Minimal surface residual of a grid CSV, or a convergence study on a
    /// built-in surface.
    MseResidual {
        grid: Option<PathBuf>,
        #[arg(long, value_enum)]
        surface: Option<Surface>,
        /// Coarsest spacing of the convergence study.
        #[arg(long, default_value_t = 0.05)]
        h: f64,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Builds the hodograph map from two sheets and measures the
    /// composition error.
    LegendreRoundtrip {
        #[arg(long, requires = "u2")]
        u1: Option<PathBuf>,
        #[arg(long, requires = "u1")]
        u2: Option<PathBuf>,
        /// Spacing of the built-in sheets.
        #[arg(long, default_value_t = 0.02)]
        h: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Surface {
    Catenoid,
    Scherk,
    SphereCap,
}

/// Outcome class of a successful run; errors map to exit code 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Failed,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::Failed => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub report: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{path}: {source}")]
    Adn {
        path: PathBuf,
        source: plateau::adn::AdnError,
    },
    #[error(transparent)]
    Check(#[from] plateau::adn::AdnError),
    #[error(transparent)]
    Linearize(#[from] plateau::linearize::LinearizeError),
    #[error(transparent)]
    Junction(#[from] plateau::junction::JunctionError),
    #[error(transparent)]
    Mse(#[from] plateau::graph_mse::MseError),
    #[error(transparent)]
    Legendre(#[from] plateau::legendre::LegendreError),
    #[error("{path}: {source}")]
    Grid {
        path: PathBuf,
        source: plateau::grid::GridError,
    },
    #[error("{0}")]
    Usage(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = RunConfig::from_cli(cli)?;
    match &cli.command {
        Command::CheckCoercivity { system } => check_coercivity(&cfg, system),
        Command::Linearize { junction } => linearize(&cfg, junction),
        Command::SolveJunction { config } => solve_junction(&cfg, config),
        Command::MseResidual {
            grid,
            surface,
            h,
            levels,
        } => mse_residual(
            &cfg,
            grid.as_deref(),
            surface.unwrap_or(Surface::Catenoid),
            *h,
            *levels,
        ),
        Command::LegendreRoundtrip { u1, u2, h } => {
            let pair = u1.as_deref().zip(u2.as_deref());
            legendre_roundtrip(&cfg, pair, *h)
        }
    }
}
