//! Plain `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every error carries the line it
//! came from, and the whole file is checked before anything runs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use levyspin::{builtin_mass, Grid, JumpLaw, LevyModel, MassFunction, Observable};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {message}")]
    Line {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

/// Keys the parser accepts. Everything else is an error.
const KNOWN_KEYS: &[&str] = &[
    "model.kind",
    "model.A",
    "model.alpha",
    "model.c",
    "model.jump_rate",
    "model.jump_law",
    "model.jump_size",
    "kill_rate",
    "mass.name",
    "mass.param",
    "grid.L",
    "grid.N",
    "spectrum.k",
    "partition.orders",
    "moments.n_max",
    "moments.x",
    "potential.rates",
    "smallr.rates",
    "smallr.N",
    "mc.paths",
    "mc.dt",
    "mc.seed",
    "mc.x",
    "mc.t_max",
    "mc.window",
    "mcmc.sweeps",
    "mcmc.chains",
    "mcmc.ring_n",
    "mcmc.burn_in",
    "mcmc.observable",
    "mcmc.distances",
    "cache",
    "cache.dir",
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Raw key/value pairs with their line numbers.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    path: String,
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Line {
                path: path.to_string(),
                line,
                message,
            };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(err(format!("unknown key '{key}'")));
            }
            if value.is_empty() {
                return Err(err(format!("empty value for '{key}'")));
            }
            if let Some(prev) = entries.get(key) {
                let prev: &Entry = prev;
                return Err(err(format!("duplicate key '{key}' (first set on line {})", prev.line)));
            }
            entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                },
            );
        }
        Ok(Self {
            path: path.to_string(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    fn line_error(&self, key: &str, message: String) -> ConfigError {
        match self.entries.get(key) {
            Some(e) => ConfigError::Line {
                path: self.path.clone(),
                line: e.line,
                message,
            },
            None => ConfigError::File {
                path: self.path.clone(),
                message,
            },
        }
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn required(&self, key: &str) -> Result<&str, ConfigError> {
        self.str(key).ok_or_else(|| ConfigError::File {
            path: self.path.clone(),
            message: format!("missing required key '{key}'"),
        })
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| self.line_error(key, format!("cannot parse '{v}' for '{key}'"))),
        }
    }

    fn required_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.required(key)?;
        Ok(self.parsed(key)?.expect("present"))
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(v) = self.str(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| s.trim().parse::<T>())
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
            .map_err(|_| self.line_error(key, format!("cannot parse list '{v}' for '{key}'")))
    }

    /// Wraps a library error with the line of the key that caused it.
    fn lib_error(&self, key: &str, e: levyspin::Error) -> ConfigError {
        self.line_error(key, format!("{}: {e}", error_kind(&e)))
    }
}

#[derive(Debug, Clone)]
pub struct McSettings {
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub x: f64,
    pub t_max: f64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct McmcSettings {
    pub sweeps: usize,
    pub chains: usize,
    pub ring_n: usize,
    pub burn_in: usize,
    pub observable: Observable,
    pub distances: Vec<usize>,
}

/// A fully resolved run: every default filled in and every name looked up.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: LevyModel,
    pub mass: MassFunction,
    pub kill_rate: f64,
    pub grid_half_width: f64,
    pub grid_nodes: usize,
    pub modes: usize,
    pub orders: Vec<u32>,
    pub moments_n_max: usize,
    pub moments_x: f64,
    pub potential_rates: Vec<f64>,
    pub smallr_rates: Vec<f64>,
    pub smallr_nodes: usize,
    pub mc: McSettings,
    pub mcmc: McmcSettings,
    pub cache: bool,
    pub cache_dir: Option<PathBuf>,
    /// Canonical `key=value` lines, sorted; the config hash is taken over these.
    canonical: Vec<(String, String)>,
}

fn model_from(raw: &RawConfig) -> Result<LevyModel, ConfigError> {
    let kind = raw.required("model.kind")?;
    let a = raw.or("model.A", 1.0)?;
    let model = match kind {
        "brownian" => LevyModel::brownian(a).map_err(|e| raw.lib_error("model.A", e))?,
        "stable" => {
            let alpha: f64 = raw.required_parsed("model.alpha")?;
            let c = raw.or("model.c", 1.0)?;
            LevyModel::stable(alpha, c).map_err(|e| raw.lib_error("model.alpha", e))?
        }
        "brownian_jumps" => {
            let rate = raw.or("model.jump_rate", 1.0)?;
            let size = raw.or("model.jump_size", 1.0)?;
            let law = match raw.str("model.jump_law").unwrap_or("two_point") {
                "two_point" => JumpLaw::TwoPoint { size },
                "gaussian" => JumpLaw::Gaussian { std_dev: size },
                other => {
                    return Err(raw.line_error(
                        "model.jump_law",
                        format!("unknown jump law '{other}' (two_point, gaussian)"),
                    ))
                }
            };
            LevyModel::brownian_with_jumps(a, rate, law).map_err(|e| raw.lib_error("model.jump_rate", e))?
        }
        other => {
            return Err(raw.line_error(
                "model.kind",
                format!("unknown model '{other}' (brownian, stable, brownian_jumps)"),
            ))
        }
    };
    let report = model.check_condition2();
    if !report.holds {
        return Err(raw.lib_error("model.kind", levyspin::Error::ConditionViolated(report.diagnostic)));
    }
    Ok(model)
}

fn positive(raw: &RawConfig, key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(raw.line_error(key, format!("'{key}' must be positive, got {v}")))
    }
}

fn at_least(raw: &RawConfig, key: &str, v: usize, min: usize) -> Result<usize, ConfigError> {
    if v >= min {
        Ok(v)
    } else {
        Err(raw.line_error(key, format!("'{key}' must be at least {min}, got {v}")))
    }
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig, seed_override: Option<u64>) -> Result<Self, ConfigError> {
        let model = model_from(raw)?;
        let kill_rate = positive(raw, "kill_rate", raw.required_parsed("kill_rate")?)?;

        let mass_param: Option<f64> = raw.parsed("mass.param")?;
        let mass = builtin_mass(raw.required("mass.name")?, mass_param)
            .map_err(|e| raw.lib_error("mass.name", e))?;

        let grid_half_width = positive(raw, "grid.L", raw.or("grid.L", mass.default_half_width())?)?;
        let grid_nodes: usize = raw.or("grid.N", 1001)?;
        if grid_nodes.is_multiple_of(2) || grid_nodes < 5 {
            return Err(raw.line_error("grid.N", format!("grid.N must be odd and at least 5, got {grid_nodes}")));
        }
        let modes = at_least(raw, "spectrum.k", raw.or("spectrum.k", 20)?, 2)?;
        let orders = raw.list("partition.orders")?.unwrap_or_else(|| vec![2, 4, 8, 16, 32, 64]);
        if let Some(&n) = orders.iter().find(|&&n| n < 2) {
            return Err(raw.line_error("partition.orders", format!("orders must be at least 2, got {n}")));
        }
        let moments_n_max = at_least(raw, "moments.n_max", raw.or("moments.n_max", 8)?, 1)?;
        let moments_x = raw.or("moments.x", 0.0)?;
        let potential_rates = raw
            .list("potential.rates")?
            .unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3, 1e-4]);
        let smallr_rates = raw.list("smallr.rates")?.unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4]);
        for (key, rates) in [("potential.rates", &potential_rates), ("smallr.rates", &smallr_rates)] {
            for &r in rates.iter() {
                positive(raw, key, r)?;
            }
        }
        let smallr_nodes: usize = raw.or("smallr.N", 2001)?;
        if smallr_nodes.is_multiple_of(2) {
            return Err(raw.line_error("smallr.N", format!("smallr.N must be odd, got {smallr_nodes}")));
        }

        let seed = match seed_override {
            Some(s) => s,
            None => raw.or("mc.seed", 0u64)?,
        };
        let window: Vec<f64> = raw.list("mc.window")?.unwrap_or_else(|| vec![1.0, 3.0]);
        if window.len() != 2 || !(window[0] >= 0.0 && window[1] > window[0]) {
            return Err(raw.line_error("mc.window", "mc.window needs two increasing times".into()));
        }
        let mc = McSettings {
            paths: at_least(raw, "mc.paths", raw.or("mc.paths", 20_000)?, 1)?,
            dt: positive(raw, "mc.dt", raw.or("mc.dt", 0.01)?)?,
            seed,
            x: raw.or("mc.x", 0.0)?,
            t_max: positive(raw, "mc.t_max", raw.or("mc.t_max", 4.0)?)?,
            window: (window[0], window[1]),
        };
        let observable = match raw.str("mcmc.observable") {
            None => Observable::BUMP,
            Some(s) => Observable::parse(s).map_err(|e| raw.lib_error("mcmc.observable", e))?,
        };
        let ring_n = at_least(raw, "mcmc.ring_n", raw.or("mcmc.ring_n", 64)?, 2)?;
        let distances = raw
            .list("mcmc.distances")?
            .unwrap_or_else(|| (1..=8.min(ring_n - 1)).collect());
        let mcmc = McmcSettings {
            sweeps: at_least(raw, "mcmc.sweeps", raw.or("mcmc.sweeps", 100_000)?, 1)?,
            chains: at_least(raw, "mcmc.chains", raw.or("mcmc.chains", 4)?, 1)?,
            ring_n,
            burn_in: raw.or("mcmc.burn_in", 10_000)?,
            observable,
            distances,
        };
        let cache = match raw.str("cache").unwrap_or("true") {
            "true" | "on" | "1" => true,
            "false" | "off" | "0" => false,
            other => return Err(raw.line_error("cache", format!("cache must be true or false, got '{other}'"))),
        };

        let mut canonical: Vec<(String, String)> = raw
            .entries
            .iter()
            .filter(|(k, _)| !k.starts_with("cache"))
            .map(|(k, e)| (k.clone(), e.value.clone()))
            .collect();
        canonical.retain(|(k, _)| k != "mc.seed");
        canonical.push(("mc.seed".into(), seed.to_string()));
        canonical.sort();

        Ok(Self {
            model,
            mass,
            kill_rate,
            grid_half_width,
            grid_nodes,
            modes,
            orders,
            moments_n_max,
            moments_x,
            potential_rates,
            smallr_rates,
            smallr_nodes,
            mc,
            mcmc,
            cache,
            cache_dir: raw.str("cache.dir").map(PathBuf::from),
            canonical,
        })
    }

    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self, ConfigError> {
        Self::from_raw(&RawConfig::load(path)?, seed_override)
    }

    pub fn grid(&self) -> levyspin::Result<Grid> {
        Grid::uniform(self.grid_half_width, self.grid_nodes)
    }

    /// SHA-256 over the sorted keys as given plus the effective seed.
    /// Cache settings do not enter.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.canonical {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex(&h.finalize())
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.canonical {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Variant name of a library error, e.g. `ConditionViolated`.
pub fn error_kind(e: &levyspin::Error) -> String {
    let debug = format!("{e:?}");
    debug
        .split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or("Error")
        .to_string()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
