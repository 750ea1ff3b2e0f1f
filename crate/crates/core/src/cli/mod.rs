//! Configuration, run orchestration, exports and canned examples.

mod config;
mod examples;
mod export;

pub use config::{parse_config, parse_fuel_coeffs, ConfigError, RunConfig, Weight};
pub use examples::{run_example, EXAMPLES};
pub use export::{export, sample_times, write_events, write_trajectories, ExportOptions, RunReport, FUEL_DT};

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::Error;
use crate::metrics::FuelCoeffs;
use crate::safety::Headway;
use crate::sim::{run, SimConfig};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Io { path: PathBuf, message: String },
    Run(Error),
}

impl CliError {
    pub(crate) fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    /// 1 for configuration and file problems, 2 when planning fails.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Run(Error::InvalidParameter(_)) => 1,
            CliError::Run(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Io { path, message } => write!(f, "{}: {message}", path.display()),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

pub fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(parse_config(&text)?)
}

fn fuel_coeffs(cfg: &RunConfig) -> Result<FuelCoeffs, CliError> {
    match &cfg.fuel_coeffs {
        None => Ok(FuelCoeffs::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Ok(parse_fuel_coeffs(&text)?)
        }
    }
}

/// Output directory of one seed: the configured directory itself for a
/// single run, `seed_<n>` below it for a sweep.
pub fn seed_dir(cfg: &RunConfig, seed: u64) -> PathBuf {
    if cfg.seeds == 1 {
        cfg.output_dir.clone()
    } else {
        cfg.output_dir.join(format!("seed_{seed}"))
    }
}

/// Runs every configured seed and writes its outputs. Seeds run in
/// parallel; each writes only to its own directory.
pub fn run_config(cfg: &RunConfig) -> Result<Vec<RunReport>, CliError> {
    let base = cfg.params()?;
    let fuel = fuel_coeffs(cfg)?;
    let seeds: Vec<u64> = (0..cfg.seeds).map(|k| cfg.rng_seed + k).collect();
    seeds
        .par_iter()
        .map(|&seed| {
            let mut p = base.clone();
            p.rng_seed = seed;
            let sim = SimConfig::new(p.clone(), cfg.horizon);
            let res = run(&sim)?;
            let opts = ExportOptions {
                seed,
                beta: p.beta,
                headway: Headway {
                    phi: p.phi,
                    delta: p.delta,
                },
                sample_dt: cfg.sample_dt,
                fuel: &fuel,
                braking: cfg.braking,
                baseline: cfg.baseline,
            };
            export(&res, &opts, &p, &seed_dir(cfg, seed))
        })
        .collect()
}
