//! Command-line front end: configuration, sweeps over momenta, and
//! deterministic CSV/JSON export.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;

use config::{parse_config, parse_momentum, Format, RunConfig};

/// Failure classes, one per process exit code.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Failure(_) => 1,
            CliError::Usage(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }
}

impl From<triboson::Error> for CliError {
    fn from(e: triboson::Error) -> Self {
        use triboson::Error as E;
        match e {
            E::InvalidInput(_) | E::Resource(_) | E::Aliasing { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Failure(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "triboson",
    version,
    about = "Spectra of two and three lattice bosons with on-site attraction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Two-body bound-state dispersion over a k sweep (CSV by default).
    TwobodyBand,
    /// Essential spectrum of the three-body operator at one K (JSON).
    EssSpectrum,
    /// Count and locate three-body bound states at one K (JSON).
    BoundStates,
    /// Three-body bound-state bands over a K sweep (CSV plus smoothness sidecar).
    Bands,
    /// Run the acceptance checks and print a pass/fail table.
    Validate,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML file with any of the keys below; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Lattice dimension, 1 or 2.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Coupling, strictly negative.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Total momentum, e.g. `0`, `pi/2` or `pi/2,-pi/4`.
    #[arg(long = "K", global = true, allow_hyphen_values = true)]
    pub total: Option<String>,
    /// Quadrature points per axis, even and at least 8.
    #[arg(long, global = true)]
    pub grid_n: Option<usize>,
    /// Energy tolerance in (0, 1e-3].
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tol: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Cross-check bound states against exact diagonalization.
    #[arg(long, global = true)]
    pub with_oracle: bool,
    /// Reduced validation case lists.
    #[arg(long, global = true)]
    pub quick: bool,
    /// Sweep points per axis for `twobody-band` and `bands`.
    #[arg(long, global = true)]
    pub k_points: Option<usize>,
    /// CSV file for reconstructed bound-state wavefunctions.
    #[arg(long, global = true)]
    pub wavefunctions: Option<PathBuf>,
    #[arg(long, global = true, hide = true)]
    pub inject_sign_flip: bool,
}

impl Flags {
    /// Defaults, then the config file, then these flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", path.display()))
                })?;
                parse_config(&text)?
            }
            None => Default::default(),
        };
        let mut c = RunConfig::from_file(&file)?;
        if let Some(v) = self.dim {
            c.dim = v;
            if file.total.is_none() {
                c.total = vec![0.0; v];
            }
        }
        if let Some(v) = self.mu {
            c.mu = v;
        }
        if let Some(v) = &self.total {
            c.total = parse_momentum(v)?;
        }
        if let Some(v) = self.grid_n {
            c.grid_n = v;
        }
        if let Some(v) = self.tol {
            c.tol = v;
        }
        if let Some(v) = &self.out {
            c.out = Some(v.clone());
        }
        c.format = self.format.or(c.format);
        if let Some(v) = self.jobs {
            c.jobs = v;
        }
        c.with_oracle |= self.with_oracle;
        c.quick |= self.quick;
        c.k_points = self.k_points.or(c.k_points);
        if let Some(v) = &self.wavefunctions {
            c.wavefunctions = Some(v.clone());
        }
        c.validate()?;
        Ok(c)
    }
}

/// Resolves the configuration and runs the command on a pool of `jobs`
/// worker threads.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config = cli.flags.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| CliError::Failure(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::TwobodyBand => commands::twobody_band(&config),
        Command::EssSpectrum => commands::ess_spectrum(&config),
        Command::BoundStates => commands::bound_states(&config),
        Command::Bands => commands::bands(&config),
        Command::Validate => commands::validate(&config, cli.flags.inject_sign_flip),
    })
}
