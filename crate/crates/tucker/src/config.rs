//! Run configuration shared by the config file and the command line.
//!
//! Layering: built-in defaults, then the JSON config file, then flags.
//! Mode-dependent thresholds stay `None` here and are resolved once by the
//! search driver.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tucker_core::search::{DeltaGrid, Init, Mode, SearchConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Theory,
    Practical,
}

/// `zero`, `hosvd` or `random:<scale>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitSpec {
    Zero,
    Hosvd,
    Random(f64),
}

impl FromStr for InitSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "zero" => Ok(InitSpec::Zero),
            "hosvd" => Ok(InitSpec::Hosvd),
            _ => {
                let scale = s
                    .strip_prefix("random:")
                    .ok_or_else(|| format!("unknown init '{s}', expected zero, hosvd or random:<scale>"))?;
                let v: f64 = scale.parse().map_err(|_| format!("bad random init scale '{scale}'"))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(format!("random init scale must be positive, got {v}"));
                }
                Ok(InitSpec::Random(v))
            }
        }
    }
}

impl TryFrom<String> for InitSpec {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        s.parse()
    }
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::Zero => f.write_str("zero"),
            InitSpec::Hosvd => f.write_str("hosvd"),
            InitSpec::Random(s) => write!(f, "random:{s}"),
        }
    }
}

impl From<InitSpec> for String {
    fn from(i: InitSpec) -> String {
        i.to_string()
    }
}

/// Step grid for the sampled directions. `center = None` uses `σ^{1/4}`
/// (`σ^{1/8}` when all three modes are missing).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeltaGridSpec {
    pub center: Option<f64>,
    pub points: usize,
    pub decades: f64,
}

impl Default for DeltaGridSpec {
    fn default() -> Self {
        let g = DeltaGrid::default();
        Self {
            center: g.center,
            points: g.points,
            decades: g.decades,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: ModeName,
    /// Required; no default.
    pub rank: Option<usize>,
    /// Checked against the tensor when given.
    pub dim: Option<usize>,
    pub lambda: Option<f64>,
    pub epsilon: f64,
    pub seed: u64,
    /// Maximum gradient evaluations per restart.
    pub budget: usize,
    pub samples_per_block: Option<usize>,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub sigma: Option<f64>,
    pub min_improvement: Option<f64>,
    pub c_gamma: f64,
    pub delta_grid: DeltaGridSpec,
    pub init: InitSpec,
    pub trace_stride: usize,
    pub restarts: usize,
    /// Output directory.
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let base = SearchConfig::practical(1);
        Self {
            mode: ModeName::Practical,
            rank: None,
            dim: None,
            lambda: None,
            epsilon: base.epsilon,
            seed: base.seed,
            budget: base.budget,
            samples_per_block: None,
            tau1: None,
            tau2: None,
            sigma: None,
            min_improvement: None,
            c_gamma: base.c_gamma,
            delta_grid: DeltaGridSpec::default(),
            init: InitSpec::Zero,
            trace_stride: base.trace_stride,
            restarts: 1,
            out: PathBuf::from("tucker-out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|source| CliError::Read {
            path: path.into(),
            source,
        })?;
        serde_json::from_slice(&bytes).map_err(|source| CliError::Json {
            path: path.into(),
            source,
        })
    }

    /// Search configuration for restart `restart` (seed `seed + restart`).
    pub fn search_config(&self, restart: usize) -> Result<SearchConfig> {
        let rank = self
            .rank
            .ok_or_else(|| CliError::Config("rank is required (--rank or \"rank\" in the config file)".into()))?;
        if self.restarts == 0 {
            return Err(CliError::Config("restarts must be at least 1".into()));
        }
        if !(self.c_gamma > 0.0) {
            return Err(CliError::Config("c_gamma must be positive".into()));
        }
        let mut cfg = match self.mode {
            ModeName::Practical => SearchConfig::practical(rank),
            ModeName::Theory => SearchConfig::theory(rank),
        };
        cfg.mode = match self.mode {
            ModeName::Practical => Mode::Practical,
            ModeName::Theory => Mode::Theory,
        };
        cfg.lambda = self.lambda;
        cfg.epsilon = self.epsilon;
        cfg.seed = self.seed.wrapping_add(restart as u64);
        cfg.budget = self.budget;
        cfg.samples_per_block = self.samples_per_block;
        cfg.tau1 = self.tau1;
        cfg.tau2 = self.tau2;
        cfg.sigma = self.sigma;
        cfg.min_improvement = self.min_improvement;
        cfg.c_gamma = self.c_gamma;
        cfg.delta_grid = DeltaGrid {
            center: self.delta_grid.center,
            points: self.delta_grid.points,
            decades: self.delta_grid.decades,
        };
        cfg.init = match self.init {
            InitSpec::Zero => Init::Zero,
            InitSpec::Hosvd => Init::Hosvd,
            InitSpec::Random(s) => Init::Random(s),
        };
        cfg.trace_stride = self.trace_stride;
        if matches!(cfg.delta_grid.center, Some(c) if !(c > 0.0)) {
            return Err(CliError::Config("delta grid center must be positive".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
