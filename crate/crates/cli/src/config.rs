//! Run configuration: built-in defaults, then an optional TOML file, then
//! command-line flags.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::Deserialize;

use crate::CliError;

/// Output encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// `K` in a config file: a momentum expression or a list of numbers.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum MomentumSpec {
    Text(String),
    Components(Vec<f64>),
}

impl MomentumSpec {
    pub fn resolve(&self) -> Result<Vec<f64>, CliError> {
        match self {
            MomentumSpec::Text(s) => parse_momentum(s),
            MomentumSpec::Components(c) => {
                if c.iter().all(|v| v.is_finite()) && !c.is_empty() {
                    Ok(c.clone())
                } else {
                    Err(CliError::Usage(format!(
                        "invalid momentum components {c:?}"
                    )))
                }
            }
        }
    }
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dim: Option<usize>,
    pub mu: Option<f64>,
    #[serde(rename = "K")]
    pub total: Option<MomentumSpec>,
    pub grid_n: Option<usize>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: Option<usize>,
    pub with_oracle: Option<bool>,
    pub quick: Option<bool>,
    pub k_points: Option<usize>,
    pub wavefunctions: Option<PathBuf>,
}

pub fn parse_config(text: &str) -> Result<FileConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Usage(format!("config file: {e}")))
}

/// Parses a comma-separated momentum such as `0`, `pi/2`, `-2pi/3`,
/// `0.5*pi, -1.25` or `π/4`.
pub fn parse_momentum(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.is_empty() || parts.len() > 2 {
        return Err(CliError::Usage(format!(
            "momentum must have 1 or 2 components, got {text:?}"
        )));
    }
    parts.into_iter().map(parse_component).collect()
}

fn parse_number(s: &str, whole: &str) -> Result<f64, CliError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("cannot read {whole:?} as a momentum component")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!(
            "momentum component {whole:?} is not finite"
        )))
    }
}

fn parse_component(raw: &str) -> Result<f64, CliError> {
    let s = raw.trim();
    if s.is_empty() {
        return Err(CliError::Usage("empty momentum component".into()));
    }
    let lower = s.to_ascii_lowercase().replace('π', "pi");
    let Some(at) = lower.find("pi") else {
        return parse_number(&lower, raw);
    };
    let (head, tail) = (lower[..at].trim(), lower[at + 2..].trim());
    let head = head.strip_suffix('*').map(str::trim).unwrap_or(head);
    let coefficient = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => parse_number(h, raw)?,
    };
    let divisor = match tail {
        "" => 1.0,
        t => match t.strip_prefix('/') {
            Some(d) => parse_number(d, raw)?,
            None => return Err(CliError::Usage(format!("unexpected {t:?} in {raw:?}"))),
        },
    };
    if divisor == 0.0 {
        return Err(CliError::Usage(format!("division by zero in {raw:?}")));
    }
    let value = coefficient * PI / divisor;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::Usage(format!(
            "momentum component {raw:?} is not finite"
        )))
    }
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub mu: f64,
    pub total: Vec<f64>,
    pub grid_n: usize,
    pub tol: f64,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: usize,
    pub with_oracle: bool,
    pub quick: bool,
    pub k_points: Option<usize>,
    pub wavefunctions: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            mu: -1.0,
            total: vec![0.0],
            grid_n: 32,
            tol: 1e-9,
            out: None,
            format: None,
            jobs: 0,
            with_oracle: false,
            quick: false,
            k_points: None,
            wavefunctions: None,
        }
    }
}

impl RunConfig {
    /// Layers a file over the defaults.
    pub fn from_file(file: &FileConfig) -> Result<Self, CliError> {
        let mut c = Self::default();
        let mut explicit_total = false;
        if let Some(v) = file.dim {
            c.dim = v;
        }
        if let Some(v) = file.mu {
            c.mu = v;
        }
        if let Some(v) = &file.total {
            c.total = v.resolve()?;
            explicit_total = true;
        }
        if let Some(v) = file.grid_n {
            c.grid_n = v;
        }
        if let Some(v) = file.tol {
            c.tol = v;
        }
        c.out = file.out.clone().or(c.out);
        c.format = file.format.or(c.format);
        if let Some(v) = file.jobs {
            c.jobs = v;
        }
        if let Some(v) = file.with_oracle {
            c.with_oracle = v;
        }
        if let Some(v) = file.quick {
            c.quick = v;
        }
        c.k_points = file.k_points.or(c.k_points);
        c.wavefunctions = file.wavefunctions.clone().or(c.wavefunctions);
        if !explicit_total {
            c.total = vec![0.0; c.dim];
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(1..=2).contains(&self.dim) {
            return Err(CliError::Usage(format!(
                "--dim must be 1 or 2, got {}",
                self.dim
            )));
        }
        if !(self.mu.is_finite() && self.mu < 0.0) {
            return Err(CliError::Usage(format!(
                "--mu must be negative, got {}",
                self.mu
            )));
        }
        if self.grid_n < 8 || !self.grid_n.is_multiple_of(2) {
            return Err(CliError::Usage(format!(
                "--grid-n must be even and at least 8, got {}",
                self.grid_n
            )));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-3) {
            return Err(CliError::Usage(format!(
                "--tol must lie in (0, 1e-3], got {}",
                self.tol
            )));
        }
        if self.total.len() != self.dim {
            return Err(CliError::Usage(format!(
                "--K has {} components but --dim is {}",
                self.total.len(),
                self.dim
            )));
        }
        if let Some(p) = self.k_points {
            if p < 2 {
                return Err(CliError::Usage(format!(
                    "--k-points must be at least 2, got {p}"
                )));
            }
        }
        Ok(())
    }
}
