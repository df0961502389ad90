use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::gallery::{ExampleConfig, GalleryError};
use crate::problem::PackedPoint;
use crate::solver::SolverOptions;

/// A configuration problem, tied to the offending key when there is one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub(crate) fn at(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    pub(crate) fn general(message: impl Into<String>) -> Self {
        Self {
            key: None,
            message: message.into(),
        }
    }
}

impl From<GalleryError> for ConfigError {
    fn from(e: GalleryError) -> Self {
        Self {
            key: e.key().map(|k| format!("example.{k}")),
            message: e.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(key) => write!(f, "`{key}`: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    JsonLines,
    Csv,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json-lines" => Ok(Format::JsonLines),
            "csv" => Ok(Format::Csv),
            other => Err(format!("expected json-lines or csv, got `{other}`")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::JsonLines => "json-lines",
            Format::Csv => "csv",
        })
    }
}

/// Where the solver starts.
#[derive(Debug, Clone, PartialEq)]
pub enum StartPoint {
    /// Standard-normal entries drawn from the solver seed.
    Random,
    /// The example's known feasible point.
    Feasible,
    Given(Vec<f64>),
}

impl FromStr for StartPoint {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(StartPoint::Random),
            "feasible" => Ok(StartPoint::Feasible),
            list => list
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| format!("`{}`: {e}", v.trim()))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(StartPoint::Given)
                .map_err(|e| {
                    format!("expected random, feasible or a comma-separated list of numbers; {e}")
                }),
        }
    }
}

/// Everything one `run` needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub example: ExampleConfig,
    pub solver: SolverOptions,
    pub start: StartPoint,
    pub format: Format,
    /// Iterate log destination; standard output when absent.
    pub out: Option<PathBuf>,
    /// Summary record destination; defaults to `<out>.summary` when `out`
    /// is given.
    pub summary: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(example: ExampleConfig) -> Self {
        let seed = example.seed();
        Self {
            example,
            solver: SolverOptions {
                seed,
                ..Default::default()
            },
            start: StartPoint::Random,
            format: Format::JsonLines,
            out: None,
            summary: None,
            seed,
        }
    }

    pub fn summary_path(&self) -> Option<PathBuf> {
        self.summary.clone().or_else(|| {
            self.out.as_ref().map(|p| {
                let mut s = p.clone().into_os_string();
                s.push(".summary");
                PathBuf::from(s)
            })
        })
    }

    /// Builds the configuration from `key = value` entries. `example` names
    /// the gallery example, `seed` seeds both the example and the solver
    /// unless `example.seed` or `solver.seed` say otherwise.
    pub fn from_entries(entries: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let name = entries
            .get("example")
            .ok_or_else(|| ConfigError::at("example", "no example given"))?;
        let example = ExampleConfig::default_for(name.trim())
            .map_err(|e| ConfigError::at("example", e.to_string()))?;
        let mut cfg = RunConfig::new(example);
        if let Some(seed) = entries.get("seed") {
            let seed: u64 = parse("seed", seed)?;
            cfg.seed = seed;
            cfg.solver.seed = seed;
            cfg.example
                .set("seed", &seed.to_string())
                .map_err(ConfigError::from)?;
        }
        for (key, value) in entries {
            match key.as_str() {
                "example" | "seed" => {}
                "format" => cfg.format = parse("format", value)?,
                "out" => cfg.out = Some(PathBuf::from(value.trim())),
                "summary" => cfg.summary = Some(PathBuf::from(value.trim())),
                k => {
                    if let Some(field) = k.strip_prefix("example.") {
                        cfg.example.set(field, value).map_err(ConfigError::from)?;
                    } else if let Some(field) = k.strip_prefix("solver.") {
                        cfg.set_solver(field, value)?;
                    } else {
                        return Err(ConfigError::at(k, "unknown key"));
                    }
                }
            }
        }
        cfg.example.validate().map_err(ConfigError::from)?;
        cfg.solver.validate().map_err(|e| match e {
            crate::solver::SolverError::InvalidOption { key, reason } => {
                ConfigError::at(&format!("solver.{key}"), reason)
            }
            other => ConfigError::general(other.to_string()),
        })?;
        Ok(cfg)
    }

    fn set_solver(&mut self, field: &str, value: &str) -> Result<(), ConfigError> {
        let key = format!("solver.{field}");
        let s = &mut self.solver;
        match field {
            "opt_tol" => s.opt_tol = parse(&key, value)?,
            "viol_ineq_tol" => s.viol_ineq_tol = parse(&key, value)?,
            "viol_eq_tol" => s.viol_eq_tol = parse(&key, value)?,
            "max_iter" => s.max_iter = parse(&key, value)?,
            "mu0" => s.mu0 = parse(&key, value)?,
            "steering_c_v" => s.steering_c_v = parse(&key, value)?,
            "steering_c_mu" => s.steering_c_mu = parse(&key, value)?,
            "steering_max_trials" => s.steering_max_trials = parse(&key, value)?,
            "wolfe_c1" => s.wolfe_c1 = parse(&key, value)?,
            "wolfe_c2" => s.wolfe_c2 = parse(&key, value)?,
            "linesearch_max_bisections" => s.linesearch_max_bisections = parse(&key, value)?,
            "gradient_cache_size" => {
                s.gradient_cache_size = match value.trim() {
                    "auto" => None,
                    v => Some(parse(&key, v)?),
                }
            }
            "limited_memory_pairs" => s.limited_memory_pairs = parse(&key, value)?,
            "stationarity_radius" => s.stationarity_radius = parse(&key, value)?,
            "qp_tol" => s.qp_tol = parse(&key, value)?,
            "qp_max_iter" => s.qp_max_iter = parse(&key, value)?,
            "seed" => s.seed = parse(&key, value)?,
            "x0" => self.start = parse(&key, value)?,
            _ => return Err(ConfigError::at(&key, "unknown key")),
        }
        Ok(())
    }

    /// The solver options with the start point resolved against the
    /// example's feasible point.
    pub fn solver_options(
        &self,
        feasible: Option<PackedPoint>,
    ) -> Result<SolverOptions, ConfigError> {
        let x0 = match &self.start {
            StartPoint::Random => None,
            StartPoint::Feasible => Some(feasible.ok_or_else(|| {
                ConfigError::at("solver.x0", "this example has no known feasible point")
            })?),
            StartPoint::Given(v) => Some(PackedPoint(v.clone())),
        };
        Ok(SolverOptions {
            x0,
            ..self.solver.clone()
        })
    }
}

/// Solver keys, without the `solver.` prefix, in the order the
/// configuration accepts them.
pub const SOLVER_KEYS: &[&str] = &[
    "opt_tol",
    "viol_ineq_tol",
    "viol_eq_tol",
    "max_iter",
    "mu0",
    "steering_c_v",
    "steering_c_mu",
    "steering_max_trials",
    "wolfe_c1",
    "wolfe_c2",
    "linesearch_max_bisections",
    "gradient_cache_size",
    "limited_memory_pairs",
    "stationarity_radius",
    "qp_tol",
    "qp_max_iter",
    "seed",
    "x0",
];

const TOP_KEYS: &[&str] = &["example", "seed", "format", "out", "summary"];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| ConfigError::at(key, format!("cannot parse `{}`: {e}", value.trim())))
}

/// Parses the flat `key = value` file format. Blank lines and lines
/// starting with `#` are ignored.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut entries = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            ConfigError::general(format!("line {}: expected `key = value`", i + 1))
        })?;
        entries.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(entries)
}

/// Renders entries in the file format accepted by [`parse_config_text`].
pub fn config_text(cfg: &RunConfig) -> String {
    let mut out = format!(
        "example = {}\nseed = {}\nformat = {}\n",
        cfg.example.name(),
        cfg.seed,
        cfg.format
    );
    for (k, v) in cfg.example.entries() {
        out.push_str(&format!("example.{k} = {v}\n"));
    }
    out
}

/// Maps a flag name (without `--`) to its configuration key. Flags mirror
/// keys with dots and underscores written as `-`; solver and example keys
/// may also drop their section prefix (`--max-iter`, `--n`), with
/// top-level keys taking precedence over solver keys over example keys.
pub fn flag_key(flag: &str, example: Option<&ExampleConfig>) -> Option<String> {
    let dashed = |k: &str| k.replace(['.', '_'], "-");
    let example_keys = example.map(|e| e.keys()).unwrap_or_default();
    let qualified = TOP_KEYS
        .iter()
        .map(|k| k.to_string())
        .chain(SOLVER_KEYS.iter().map(|k| format!("solver.{k}")))
        .chain(example_keys.iter().map(|k| format!("example.{k}")));
    let short = TOP_KEYS
        .iter()
        .map(|k| (k.to_string(), k.to_string()))
        .chain(
            SOLVER_KEYS
                .iter()
                .map(|k| (k.to_string(), format!("solver.{k}"))),
        )
        .chain(
            example_keys
                .iter()
                .map(|k| (k.clone(), format!("example.{k}"))),
        );
    qualified
        .map(|k| (k.clone(), k))
        .chain(short)
        .find(|(name, _)| dashed(name) == flag)
        .map(|(_, key)| key)
}
