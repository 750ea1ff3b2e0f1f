//! Strict `key = value` run configuration.
//!
//! One pair per line, `#` starts a comment. Unknown or repeated keys are
//! errors, and every error carries the offending line number.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::metrics::{BrakingRule, FuelCoeffs};
use crate::model::{alpha_to_beta, default_zeta, ScenarioParams};

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    /// 1-based line, when the error belongs to one.
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Time weight, given either directly or normalized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Weight {
    Alpha(f64),
    Beta(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub length: f64,
    pub phi: f64,
    pub delta: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub weight: Weight,
    /// Hold window; derived from the headway and `v_min` when absent.
    pub zeta: Option<f64>,
    pub arrival_rate_per_lane: f64,
    pub rng_seed: u64,
    /// Number of consecutive seeds to run, starting at `rng_seed`.
    pub seeds: u64,
    pub horizon: f64,
    pub output_dir: PathBuf,
    pub sample_dt: f64,
    /// Fuel coefficient file; built-in defaults when absent.
    pub fuel_coeffs: Option<PathBuf>,
    pub braking: BrakingRule,
    pub baseline: bool,
}

const REQUIRED: [&str; 11] = [
    "L",
    "phi",
    "delta",
    "v_min",
    "v_max",
    "u_min",
    "u_max",
    "alpha|beta",
    "arrival_rate_per_lane",
    "rng_seed",
    "horizon",
];

const OPTIONAL: [&str; 7] = [
    "zeta",
    "seeds",
    "output_dir",
    "sample_dt",
    "fuel_coeffs",
    "braking",
    "baseline",
];

fn braking_name(b: BrakingRule) -> &'static str {
    match b {
        BrakingRule::ZeroAll => "zero_all",
        BrakingRule::ZeroAccelOnly => "zero_accel_only",
    }
}

/// Key/value pairs with the line each came from.
fn pairs(text: &str) -> Result<BTreeMap<String, (usize, String)>, ConfigError> {
    let mut out: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::at(line, format!("expected key = value, got `{body}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::at(line, format!("empty key or value in `{body}`")));
        }
        if let Some((first, _)) = out.get(key) {
            return Err(ConfigError::at(line, format!("`{key}` already set on line {first}")));
        }
        out.insert(key.to_string(), (line, value.to_string()));
    }
    Ok(out)
}

struct Fields(BTreeMap<String, (usize, String)>);

impl Fields {
    fn take<T: FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError::at(line, format!("`{key}` expects {what}, got `{v}`"))),
        }
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.0.get(key).map(|(l, _)| *l)
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut f = Fields(pairs(text)?);
    if let Some((key, (line, _))) = f.0.iter().find(|(k, _)| {
        !REQUIRED.iter().any(|r| r.split('|').any(|r| r == k.as_str())) && !OPTIONAL.contains(&k.as_str())
    }) {
        return Err(ConfigError::at(*line, format!("unknown key `{key}`")));
    }
    if let (Some(la), Some(lb)) = (f.line("alpha"), f.line("beta")) {
        return Err(ConfigError::at(
            la.max(lb),
            format!("alpha (line {la}) and beta (line {lb}) are exclusive; give exactly one"),
        ));
    }
    let missing: Vec<&str> = REQUIRED
        .iter()
        .filter(|r| !r.split('|').any(|k| f.line(k).is_some()))
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError::general(format!(
            "missing required keys: {}",
            missing.join(", ")
        )));
    }

    let num = "a number";
    let mut req = |key: &str| -> Result<f64, ConfigError> { Ok(f.take(key, num)?.expect("checked present")) };
    let (length, phi, delta) = (req("L")?, req("phi")?, req("delta")?);
    let (v_min, v_max, u_min, u_max) = (req("v_min")?, req("v_max")?, req("u_min")?, req("u_max")?);
    let arrival_rate_per_lane = req("arrival_rate_per_lane")?;
    let horizon = req("horizon")?;
    let weight = match f.take::<f64>("alpha", num)? {
        Some(a) => Weight::Alpha(a),
        None => Weight::Beta(f.take("beta", num)?.expect("checked present")),
    };
    let rng_seed = f.take("rng_seed", "a non-negative integer")?.expect("checked present");
    let sample_dt_line = f.line("sample_dt");
    let braking_line = f.line("braking");
    let cfg = RunConfig {
        length,
        phi,
        delta,
        v_min,
        v_max,
        u_min,
        u_max,
        weight,
        zeta: f.take("zeta", num)?,
        arrival_rate_per_lane,
        rng_seed,
        seeds: f.take("seeds", "a positive integer")?.unwrap_or(1),
        horizon,
        output_dir: f
            .take::<String>("output_dir", "a path")?
            .map_or_else(|| PathBuf::from("out"), PathBuf::from),
        sample_dt: f.take("sample_dt", num)?.unwrap_or(0.1),
        fuel_coeffs: f.take::<String>("fuel_coeffs", "a path")?.map(PathBuf::from),
        braking: match f.take::<String>("braking", "a rule")?.as_deref() {
            None | Some("zero_all") => BrakingRule::ZeroAll,
            Some("zero_accel_only") => BrakingRule::ZeroAccelOnly,
            Some(other) => {
                return Err(ConfigError::at(
                    braking_line.unwrap_or(0),
                    format!("`braking` expects zero_all or zero_accel_only, got `{other}`"),
                ))
            }
        },
        baseline: f.take("baseline", "true or false")?.unwrap_or(false),
    };
    if !(cfg.sample_dt > 0.0) {
        return Err(ConfigError {
            line: sample_dt_line,
            message: "sample_dt must be positive".into(),
        });
    }
    if cfg.seeds == 0 {
        return Err(ConfigError::general("seeds must be at least 1"));
    }
    if !(cfg.horizon > 0.0) {
        return Err(ConfigError::general("horizon must be positive"));
    }
    cfg.params()?;
    Ok(cfg)
}

impl RunConfig {
    /// The merging-experiment setup with `alpha = 0.26` over one hour.
    pub fn merging_experiment() -> Self {
        let p = ScenarioParams::merging_experiment();
        RunConfig {
            length: p.length,
            phi: p.phi,
            delta: p.delta,
            v_min: p.v_min,
            v_max: p.v_max,
            u_min: p.u_min,
            u_max: p.u_max,
            weight: Weight::Alpha(0.26),
            zeta: None,
            arrival_rate_per_lane: p.arrival_rate_per_lane,
            rng_seed: p.rng_seed,
            seeds: 1,
            horizon: 3600.0,
            output_dir: PathBuf::from("out"),
            sample_dt: 0.1,
            fuel_coeffs: None,
            braking: BrakingRule::ZeroAll,
            baseline: false,
        }
    }

    pub fn beta(&self) -> Result<f64, ConfigError> {
        match self.weight {
            Weight::Beta(b) => Ok(b),
            Weight::Alpha(a) => {
                alpha_to_beta(a, self.u_min, self.u_max).map_err(|e| ConfigError::general(e.to_string()))
            }
        }
    }

    /// Validated scenario parameters for the first seed.
    pub fn params(&self) -> Result<ScenarioParams, ConfigError> {
        let p = ScenarioParams {
            length: self.length,
            phi: self.phi,
            delta: self.delta,
            v_min: self.v_min,
            v_max: self.v_max,
            u_min: self.u_min,
            u_max: self.u_max,
            beta: self.beta()?,
            zeta: self
                .zeta
                .unwrap_or_else(|| default_zeta(self.phi, self.delta, self.v_min)),
            arrival_rate_per_lane: self.arrival_rate_per_lane,
            rng_seed: self.rng_seed,
        };
        p.validate().map_err(|e| ConfigError::general(e.to_string()))?;
        Ok(p)
    }

    /// Inverse of [`parse_config`]; floats are written in shortest
    /// round-trip form.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("L", self.length.to_string());
        kv("phi", self.phi.to_string());
        kv("delta", self.delta.to_string());
        kv("v_min", self.v_min.to_string());
        kv("v_max", self.v_max.to_string());
        kv("u_min", self.u_min.to_string());
        kv("u_max", self.u_max.to_string());
        match self.weight {
            Weight::Alpha(a) => kv("alpha", a.to_string()),
            Weight::Beta(b) => kv("beta", b.to_string()),
        }
        if let Some(z) = self.zeta {
            kv("zeta", z.to_string());
        }
        kv("arrival_rate_per_lane", self.arrival_rate_per_lane.to_string());
        kv("rng_seed", self.rng_seed.to_string());
        kv("seeds", self.seeds.to_string());
        kv("horizon", self.horizon.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv("sample_dt", self.sample_dt.to_string());
        if let Some(p) = &self.fuel_coeffs {
            kv("fuel_coeffs", p.display().to_string());
        }
        kv("braking", braking_name(self.braking).to_string());
        kv("baseline", self.baseline.to_string());
        s
    }
}

/// Fuel coefficient file: keys `w0..w3` and `r0..r2`, all required.
pub fn parse_fuel_coeffs(text: &str) -> Result<FuelCoeffs, ConfigError> {
    const KEYS: [&str; 7] = ["w0", "w1", "w2", "w3", "r0", "r1", "r2"];
    let mut f = Fields(pairs(text)?);
    if let Some((key, (line, _))) = f.0.iter().find(|(k, _)| !KEYS.contains(&k.as_str())) {
        return Err(ConfigError::at(*line, format!("unknown key `{key}`")));
    }
    let missing: Vec<&str> = KEYS.iter().filter(|k| f.line(k).is_none()).copied().collect();
    if !missing.is_empty() {
        return Err(ConfigError::general(format!(
            "missing required keys: {}",
            missing.join(", ")
        )));
    }
    let mut vals = [0.0; 7];
    for (v, k) in vals.iter_mut().zip(KEYS) {
        *v = f.take(k, "a number")?.expect("checked present");
    }
    let c = FuelCoeffs {
        w: [vals[0], vals[1], vals[2], vals[3]],
        r: [vals[4], vals[5], vals[6]],
    };
    c.validate().map_err(|e| ConfigError::general(e.to_string()))?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXPERIMENT: &str = "\
# merging experiment
L = 400
phi = 1.8
delta = 0
v_min = 10
v_max = 30
u_min = -3.924
u_max = 3.924
alpha = 0.26   # normalized weight
arrival_rate_per_lane = 600
rng_seed = 1
horizon = 3600
";

    #[test]
    fn experiment_file_parses() {
        let c = parse_config(EXPERIMENT).unwrap();
        assert_eq!(c, RunConfig::merging_experiment());
        let p = c.params().unwrap();
        assert_eq!(p, ScenarioParams::merging_experiment());
    }

    #[test]
    fn empty_file_lists_every_required_key() {
        let e = parse_config("").unwrap_err();
        assert_eq!(e.line, None);
        for k in REQUIRED {
            assert!(e.message.contains(k), "{k} not in {}", e.message);
        }
    }

    #[test]
    fn alpha_and_beta_conflict() {
        let text = format!("{EXPERIMENT}beta = 2.0\n");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.line, Some(13));
        assert!(e.message.contains("exclusive"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_type = EXPERIMENT.replace("phi = 1.8", "phi = fast");
        assert_eq!(parse_config(&bad_type).unwrap_err().line, Some(3));
        let unknown = format!("{EXPERIMENT}speed = 3\n");
        assert_eq!(parse_config(&unknown).unwrap_err().line, Some(13));
        let repeated = format!("{EXPERIMENT}L = 300\n");
        assert_eq!(parse_config(&repeated).unwrap_err().line, Some(13));
        let no_eq = format!("{EXPERIMENT}baseline\n");
        assert_eq!(parse_config(&no_eq).unwrap_err().line, Some(13));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let neg_dt = format!("{EXPERIMENT}sample_dt = 0\n");
        assert_eq!(parse_config(&neg_dt).unwrap_err().line, Some(13));
        let bounds = EXPERIMENT.replace("v_max = 30", "v_max = 5");
        assert!(parse_config(&bounds).is_err());
    }

    #[test]
    fn serialize_round_trips() {
        let mut c = RunConfig::merging_experiment();
        c.weight = Weight::Beta(2.667);
        c.zeta = Some(3.3);
        c.fuel_coeffs = Some(PathBuf::from("fuel.cfg"));
        c.braking = BrakingRule::ZeroAccelOnly;
        c.baseline = true;
        c.seeds = 4;
        assert_eq!(parse_config(&c.serialize()).unwrap(), c);
        let d = RunConfig::merging_experiment();
        assert_eq!(parse_config(&d.serialize()).unwrap(), d);
    }

    #[test]
    fn fuel_file() {
        let text = "w0=0.1569\nw1=0.0245\nw2=0\nw3=5.975e-5\nr0=0.07224\nr1=0.09681\nr2=0.001075\n";
        assert_eq!(parse_fuel_coeffs(text).unwrap(), FuelCoeffs::default());
        assert!(parse_fuel_coeffs("w0=1").unwrap_err().message.contains("r2"));
        let neg = text.replace("w2=0", "w2=-1");
        assert!(parse_fuel_coeffs(&neg).is_err());
    }
}
