use std::fs;
use std::path::{Path, PathBuf};

use plateau::junction::{OptimizerConfig, YWireSpec};
use plateau::linearize::JunctionData;
use serde::{Deserialize, Serialize};

use crate::{io_err, Cli, CliError, Command, DEFAULT_SEED};

/// Everything a subcommand needs besides its own positional inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub inputs: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub samples: Option<usize>,
    pub seed: u64,
    /// Whether the seed came from the command line rather than the default.
    pub seed_given: bool,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            inputs: Vec::new(),
            out: None,
            tol: None,
            samples: None,
            seed: DEFAULT_SEED,
            seed_given: false,
        }
    }

    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let (command, inputs) = match &cli.command {
            Command::CheckCoercivity { system } => ("check-coercivity", vec![system.clone()]),
            Command::Linearize { junction } => ("linearize", vec![junction.clone()]),
            Command::SolveJunction { config } => ("solve-junction", vec![config.clone()]),
            Command::MseResidual { grid, .. } => ("mse-residual", grid.iter().cloned().collect()),
            Command::LegendreRoundtrip { u1, u2, .. } => (
                "legendre-roundtrip",
                u1.iter().chain(u2.iter()).cloned().collect(),
            ),
        };
        let cfg = Self {
            command: command.into(),
            inputs,
            out: cli.out.clone(),
            tol: cli.tol,
            samples: cli.samples,
            seed: cli.seed.unwrap_or(DEFAULT_SEED),
            seed_given: cli.seed.is_some(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(p) = self.inputs.iter().find(|p| !p.exists()) {
            return Err(CliError::Usage(format!("{}: no such file", p.display())));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Usage(format!("--tol must be positive, got {t}")));
            }
        }
        if self.samples == Some(0) {
            return Err(CliError::Usage("--samples must be positive".into()));
        }
        Ok(())
    }

    pub fn with_out(mut self, out: impl Into<PathBuf>) -> Self {
        self.out = Some(out.into());
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = Some(tol);
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = Some(samples);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.seed_given = true;
        self
    }
}

/// Junction solve configuration: either a `[wire]` table generating the
/// Y-wire mesh, or `mesh` naming a directory written by a previous run
/// (relative to the config file).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub wire: Option<YWireSpec>,
    pub mesh: Option<PathBuf>,
    pub optimizer: OptimizerConfig,
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|source| CliError::Toml {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_solve_config(path: &Path) -> Result<SolveConfig, CliError> {
    let mut cfg: SolveConfig = read_toml(path)?;
    match (&cfg.wire, &cfg.mesh) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(CliError::Usage(format!(
                "{}: give exactly one of [wire] and mesh",
                path.display()
            )))
        }
        _ => {}
    }
    if let Some(mesh) = &cfg.mesh {
        if mesh.is_relative() {
            cfg.mesh = Some(path.parent().unwrap_or(Path::new(".")).join(mesh));
        }
    }
    Ok(cfg)
}

pub fn load_junction(path: &Path) -> Result<JunctionData, CliError> {
    let data: JunctionData = read_toml(path)?;
    data.validate()?;
    Ok(data)
}
