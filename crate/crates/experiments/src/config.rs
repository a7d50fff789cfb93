//! Experiment configuration.
//!
//! A config file is flat TOML with a mandatory `schema_version`. Values are
//! resolved in the order built-in defaults, then the file, then command-line
//! flags, so a flag always wins.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use gridstates::noise::{preset, ChannelKind};
use gridstates::peaks::{Objective, MAX_ROUNDS};
use gridstates::protocol::{preparation_strengths, LatticeKind, LatticeSpec};
use gridstates::C64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;
/// Allowed deviation of `|c0|² + |c1|²` from one.
pub const AMPLITUDE_TOL: f64 = 1e-4;

/// Round counts from this value up are only run with `--long`.
pub const LONG_ROUNDS: usize = 4;

const MAX_INPUT_DB: f64 = 30.0;
const MAX_FOCK_DIM: usize = 20_000;
const MAX_WIGNER_POINTS: usize = 401;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[value(name = "table1")]
    Table1,
    #[value(name = "fig2_sweep", alias = "fig2")]
    Fig2Sweep,
    #[value(name = "fig4_noise", alias = "fig4")]
    Fig4Noise,
    #[value(name = "fig5_shift_error", alias = "fig5")]
    Fig5ShiftError,
    #[value(name = "fig6_vacuum", alias = "fig6")]
    Fig6Vacuum,
    #[value(name = "fig7_realistic", alias = "fig7")]
    Fig7Realistic,
    #[value(name = "prepare")]
    Prepare,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Table1 => "table1",
            Self::Fig2Sweep => "fig2_sweep",
            Self::Fig4Noise => "fig4_noise",
            Self::Fig5ShiftError => "fig5_shift_error",
            Self::Fig6Vacuum => "fig6_vacuum",
            Self::Fig7Realistic => "fig7_realistic",
            Self::Prepare => "prepare",
        }
    }
}

/// Which preparation strengths a simulation uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strengths {
    ShiftError,
    DeltaP,
    /// No preparation gates.
    Flat,
}

impl Strengths {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "shift_error" => Ok(Self::ShiftError),
            "delta_p" => Ok(Self::DeltaP),
            "flat" => Ok(Self::Flat),
            _ => Err(CliError::Config(format!(
                "objective '{s}' is not one of shift_error, delta_p, flat"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ShiftError => "shift_error",
            Self::DeltaP => "delta_p",
            Self::Flat => "flat",
        }
    }

    pub fn u(self, n: usize) -> gridstates::Result<Vec<f64>> {
        match self {
            Self::ShiftError => preparation_strengths(n, Objective::ShiftError),
            Self::DeltaP => preparation_strengths(n, Objective::DeltaP),
            Self::Flat => Ok(vec![0.0; n]),
        }
    }
}

/// Every settable key. Used both for config files and for command-line
/// overrides; unset keys fall through to the next source.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub schema_version: Option<u32>,
    pub experiment: Option<Experiment>,
    pub n: Option<usize>,
    pub input_db: Option<f64>,
    pub input_db_grid: Option<Vec<f64>>,
    pub lattice: Option<String>,
    /// `[re, im]`
    pub c0: Option<[f64; 2]>,
    pub c1: Option<[f64; 2]>,
    pub objective: Option<String>,
    pub preset: Option<String>,
    pub channel: Option<String>,
    pub gamma_t: Option<f64>,
    pub gamma_t_grid: Option<Vec<f64>>,
    pub postselect: Option<bool>,
    pub fock_dim: Option<usize>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub long: Option<bool>,
    /// Recorded with the results. Every optimiser start list is fixed, so
    /// results do not depend on it.
    pub seed: Option<u64>,
    pub wigner_points: Option<usize>,
    pub wigner_extent: Option<f64>,
}

impl Settings {
    /// Parses a config file body.
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Settings = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        match s.schema_version {
            None => Err(CliError::Config("missing schema_version".into())),
            Some(SCHEMA_VERSION) => Ok(s),
            Some(v) => Err(CliError::Config(format!(
                "schema_version {v} is not supported (expected {SCHEMA_VERSION})"
            ))),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// `self` with every key set in `top` replaced.
    pub fn overlay(self, top: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: top.$f.or(self.$f)),* } };
        }
        pick!(
            schema_version, experiment, n, input_db, input_db_grid, lattice, c0, c1, objective,
            preset, channel, gamma_t, gamma_t_grid, postselect, fock_dim, out, jobs, long, seed,
            wigner_points, wigner_extent
        )
    }
}

/// Fully resolved and validated configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    /// `None` runs the experiment's default round counts.
    pub n: Option<usize>,
    /// `None` uses the experiment's default input-squeezing points.
    pub input_db_grid: Option<Vec<f64>>,
    pub lattice: LatticeSpec,
    pub c0: C64,
    pub c1: C64,
    pub objective: Strengths,
    pub preset: Option<String>,
    pub channel: Option<ChannelKind>,
    pub gamma_t_grid: Option<Vec<f64>>,
    /// `None` runs both settings where the experiment supports both.
    pub postselect: Option<bool>,
    pub fock_dim: Option<usize>,
    /// Multiplies every default Fock dimension; the audit reruns at 2.
    pub dim_scale: f64,
    pub out: PathBuf,
    pub jobs: usize,
    pub long: bool,
    pub seed: u64,
    pub wigner_points: usize,
    pub wigner_extent: f64,
}

fn finite_in(name: &str, x: f64, lo: f64, hi: f64) -> Result<f64> {
    if x.is_finite() && (lo..=hi).contains(&x) {
        Ok(x)
    } else {
        Err(CliError::Config(format!("{name} = {x} is outside [{lo}, {hi}]")))
    }
}

impl ExperimentConfig {
    /// Defaults for `experiment` with nothing overridden.
    pub fn defaults(experiment: Experiment) -> Self {
        Self::resolve(Settings {
            experiment: Some(experiment),
            ..Settings::default()
        })
        .expect("built-in defaults are valid")
    }

    /// Reads an optional file, overlays `cli`, and validates the result.
    pub fn load(file: Option<&Path>, cli: Settings) -> Result<Self> {
        let base = match file {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        Self::resolve(base.overlay(cli))
    }

    pub fn resolve(s: Settings) -> Result<Self> {
        let schema_version = s.schema_version.unwrap_or(SCHEMA_VERSION);
        if schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!("schema_version {schema_version} is not supported")));
        }
        let experiment = s
            .experiment
            .ok_or_else(|| CliError::Config("no experiment given".into()))?;
        let long = s.long.unwrap_or(false);

        if let Some(n) = s.n {
            if n == 0 {
                return Err(CliError::Config("n must be at least one round".into()));
            }
            if n > MAX_ROUNDS {
                return Err(CliError::Config(format!("n = {n} exceeds the supported {MAX_ROUNDS} rounds")));
            }
            if n >= LONG_ROUNDS && !long && experiment != Experiment::Table1 {
                return Err(CliError::Config(format!("n = {n} is a long-running cell; pass --long")));
            }
        }

        let input_db_grid = match (s.input_db_grid, s.input_db) {
            (_, Some(x)) => Some(vec![x]),
            (Some(g), None) => Some(g),
            (None, None) => None,
        };
        if let Some(g) = &input_db_grid {
            if g.is_empty() {
                return Err(CliError::Config("input_db_grid is empty".into()));
            }
            for &x in g {
                finite_in("input_db", x, 0.0, MAX_INPUT_DB)?;
            }
        }

        let lattice = match &s.lattice {
            Some(name) => LatticeSpec::parse(name).map_err(|e| CliError::Config(e.to_string()))?,
            None => LatticeSpec::square(),
        };
        if lattice.kind != LatticeKind::Square && experiment != Experiment::Prepare {
            return Err(CliError::Config(format!(
                "{} runs on the square lattice only",
                experiment.as_str()
            )));
        }

        let c0 = s.c0.map_or(C64::new(1.0, 0.0), |[re, im]| C64::new(re, im));
        let c1 = s.c1.map_or(C64::new(0.0, 0.0), |[re, im]| C64::new(re, im));
        let norm = c0.norm_sqr() + c1.norm_sqr();
        // typed amplitudes carry a few digits, so they are renormalised
        if !norm.is_finite() || (norm - 1.0).abs() > AMPLITUDE_TOL {
            return Err(CliError::Config(format!("|c0|^2 + |c1|^2 = {norm}, expected 1")));
        }
        let (c0, c1) = (c0 / norm.sqrt(), c1 / norm.sqrt());

        let objective = match &s.objective {
            Some(o) => Strengths::parse(o)?,
            None => Strengths::ShiftError,
        };

        if let Some(p) = &s.preset {
            preset(p).map_err(|e| CliError::Config(e.to_string()))?;
        }
        let channel = match &s.channel {
            Some(c) => Some(ChannelKind::parse(c).map_err(|e| CliError::Config(e.to_string()))?),
            None => None,
        };
        if s.preset.is_some() && channel.is_some() {
            return Err(CliError::Config("preset and channel are mutually exclusive".into()));
        }
        match experiment {
            Experiment::Fig4Noise if s.preset.is_some() => {
                return Err(CliError::Config("fig4_noise sweeps single channels; use --channel".into()))
            }
            Experiment::Fig7Realistic | Experiment::Prepare if channel.is_some() => {
                return Err(CliError::Config(format!(
                    "{} takes a preset, not a single channel",
                    experiment.as_str()
                )))
            }
            _ => {}
        }

        let gamma_t_grid = match (s.gamma_t_grid, s.gamma_t) {
            (_, Some(g)) => Some(vec![g]),
            (Some(g), None) => Some(g),
            (None, None) => None,
        };
        if let Some(g) = &gamma_t_grid {
            if g.is_empty() {
                return Err(CliError::Config("gamma_t_grid is empty".into()));
            }
            for &x in g {
                finite_in("gamma_t", x, 0.0, 10.0)?;
            }
        }

        if let Some(d) = s.fock_dim {
            if !(2..=MAX_FOCK_DIM).contains(&d) {
                return Err(CliError::Config(format!("fock_dim = {d} is outside [2, {MAX_FOCK_DIM}]")));
            }
        }
        let jobs = s.jobs.unwrap_or(1);
        if jobs == 0 {
            return Err(CliError::Config("jobs must be positive".into()));
        }
        let wigner_points = s.wigner_points.unwrap_or(61);
        if wigner_points > MAX_WIGNER_POINTS || wigner_points == 1 {
            return Err(CliError::Config(format!(
                "wigner_points = {wigner_points}; use 0 to skip or 2..={MAX_WIGNER_POINTS}"
            )));
        }
        let wigner_extent = finite_in("wigner_extent", s.wigner_extent.unwrap_or(6.0), 1e-3, 50.0)?;

        Ok(Self {
            schema_version,
            experiment,
            n: s.n,
            input_db_grid,
            lattice,
            c0,
            c1,
            objective,
            preset: s.preset,
            channel,
            gamma_t_grid,
            postselect: s.postselect,
            fock_dim: s.fock_dim,
            dim_scale: 1.0,
            out: s.out.unwrap_or_else(|| PathBuf::from("results")),
            jobs,
            long,
            seed: s.seed.unwrap_or(0),
            wigner_points,
            wigner_extent,
        })
    }

    /// Round counts `1..=3`, extended to 4 with `--long`, or the single
    /// requested `n`.
    pub fn rounds(&self, default_max: usize) -> Vec<usize> {
        match self.n {
            Some(n) => vec![n],
            None if self.long => (1..=default_max.max(LONG_ROUNDS)).collect(),
            None => (1..=default_max).collect(),
        }
    }

    pub fn input_grid(&self, default: &[f64]) -> Vec<f64> {
        self.input_db_grid.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn postselect_options(&self) -> Vec<bool> {
        match self.postselect {
            Some(p) => vec![p],
            None => vec![false, true],
        }
    }

    /// The Fock dimension to use where `default` would be chosen otherwise.
    pub fn dim(&self, default: usize) -> usize {
        match self.fock_dim {
            Some(d) => d,
            None => ((default as f64) * self.dim_scale).ceil() as usize,
        }
    }

    /// Samples of the Wigner grid axes, or nothing when disabled.
    pub fn wigner_axis(&self) -> Vec<f64> {
        let m = self.wigner_points;
        if m == 0 {
            return Vec::new();
        }
        let e = self.wigner_extent;
        (0..m).map(|i| -e + 2.0 * e * i as f64 / (m - 1) as f64).collect()
    }
}
