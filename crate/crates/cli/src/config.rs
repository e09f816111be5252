//! Experiment configuration: TOML file + flag/override merging, the
//! experiment catalog, and schema validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse(String),
    Schema(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "io error: {e}"),
            ConfigError::Parse(e) => write!(f, "config parse error: {e}"),
            ConfigError::Schema(e) => write!(f, "config schema error: {e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

pub const SCHEMA_VERSION: u64 = 1;

/// Resolved run configuration (file values after flag/override merging).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u64,
    pub experiment: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, toml::Value>,
}

fn default_schema_version() -> u64 {
    SCHEMA_VERSION
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn empty(experiment: &str) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            seed: None,
            out_dir: None,
            params: BTreeMap::new(),
        }
    }

    /// Apply a `KEY=VAL` override; the value is parsed as TOML when
    /// possible, else kept as a string.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (key, val) = kv
            .split_once('=')
            .ok_or_else(|| ConfigError::Schema(format!("override `{kv}` is not KEY=VAL")))?;
        let parsed: toml::Value = match val.parse::<i64>() {
            Ok(i) => toml::Value::Integer(i),
            Err(_) => match val.parse::<f64>() {
                Ok(x) => toml::Value::Float(x),
                Err(_) => match val {
                    "true" => toml::Value::Boolean(true),
                    "false" => toml::Value::Boolean(false),
                    _ => toml::from_str::<toml::Value>(&format!("v = {val}"))
                        .ok()
                        .and_then(|t| t.get("v").cloned())
                        .unwrap_or_else(|| toml::Value::String(val.to_string())),
                },
            },
        };
        match key {
            "experiment" => {
                self.experiment = val.to_string();
            }
            "seed" => {
                self.seed = Some(val.parse().map_err(|_| {
                    ConfigError::Schema(format!("seed override `{val}` is not an integer"))
                })?);
            }
            "out_dir" => {
                self.out_dir = Some(val.to_string());
            }
            _ => {
                self.params.insert(key.to_string(), parsed);
            }
        }
        Ok(())
    }

    // --- typed parameter accessors with defaults ---

    pub fn f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.params.get(key) {
            None => Ok(default),
            Some(toml::Value::Float(x)) => Ok(*x),
            Some(toml::Value::Integer(i)) => Ok(*i as f64),
            Some(v) => Err(ConfigError::Schema(format!(
                "parameter `{key}` must be a number, got {v}"
            ))),
        }
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.params.get(key) {
            None => Ok(default),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(v) => Err(ConfigError::Schema(format!(
                "parameter `{key}` must be a nonnegative integer, got {v}"
            ))),
        }
    }

    pub fn string(&self, key: &str, default: &str) -> Result<String, ConfigError> {
        match self.params.get(key) {
            None => Ok(default.to_string()),
            Some(toml::Value::String(s)) => Ok(s.clone()),
            Some(v) => Err(ConfigError::Schema(format!(
                "parameter `{key}` must be a string, got {v}"
            ))),
        }
    }

    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.params.get(key) {
            None => Ok(default.to_vec()),
            Some(toml::Value::Array(vs)) => vs
                .iter()
                .map(|v| match v {
                    toml::Value::Float(x) => Ok(*x),
                    toml::Value::Integer(i) => Ok(*i as f64),
                    other => Err(ConfigError::Schema(format!(
                        "parameter `{key}` must be a number array, got element {other}"
                    ))),
                })
                .collect(),
            Some(v) => Err(ConfigError::Schema(format!(
                "parameter `{key}` must be an array, got {v}"
            ))),
        }
    }

    pub fn usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, ConfigError> {
        Ok(self
            .f64_list(key, &default.iter().map(|&v| v as f64).collect::<Vec<_>>())?
            .into_iter()
            .map(|v| v as usize)
            .collect())
    }

    pub fn seed_required(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| {
            ConfigError::Schema(format!(
                "experiment `{}` is randomized: a seed is mandatory",
                self.experiment
            ))
        })
    }
}

/// Catalog entry: description, claim identifier printed into every JSON
/// summary, whether a seed is mandatory, and the accepted parameter keys.
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub claim: &'static str,
    pub randomized: bool,
    pub keys: &'static [&'static str],
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "symbol-check",
        description: "certify the derivative estimates of a corpus symbol class",
        claim: "symbol-class-estimates: anisotropic derivative bounds with regularity split",
        randomized: true,
        keys: &["symbol", "form", "s", "a", "m", "b", "eps", "d", "max_alpha", "max_beta", "max_j", "redeclare_nu"],
    },
    CatalogEntry {
        name: "bracket-props",
        description: "sampled structural properties of the anisotropic bracket",
        claim: "anisotropic-bracket: scale equivalence and quasi-homogeneous scaling",
        randomized: true,
        keys: &["d", "samples"],
    },
    CatalogEntry {
        name: "lifting",
        description: "global regularity lifting: the solve gains d orders over the forcing",
        claim: "global-lifting: critical-regularity shift by the operator order",
        randomized: true,
        keys: &["d", "s", "p", "grid_n", "symbol"],
    },
    CatalogEntry {
        name: "local-lifting",
        description: "staged cutoff bootstrap to local regularity s + d",
        claim: "local-lifting: cutoff bootstrap reaches s + d in finitely many stages",
        randomized: true,
        keys: &["d", "s", "p", "grid_n", "window_outer", "window_inner", "window_count"],
    },
    CatalogEntry {
        name: "residual-decay",
        description: "parametrix residual order per expansion depth",
        claim: "parametrix-residual: one anisotropic order gained per expansion term",
        randomized: true,
        keys: &["a", "eps", "depth", "grid_n", "bands"],
    },
    CatalogEntry {
        name: "norm-scan",
        description: "critical-regularity scan of the synthetic beta-profile",
        claim: "anisotropic-spaces: refinement-growth detection of the critical index",
        randomized: true,
        keys: &["beta", "d", "p", "grid_n", "levels"],
    },
    CatalogEntry {
        name: "dirichlet-steady",
        description: "steady fractional Dirichlet solve with constant forcing",
        claim: "steady-profile: constant forcing yields the d^a boundary profile",
        randomized: false,
        keys: &["a", "n_nodes"],
    },
    CatalogEntry {
        name: "dirichlet-heat",
        description: "fractional heat evolution: spectral-gap decay and boundary exponent",
        claim: "heat-decay: relaxation at the spectral gap preserving d^a behavior",
        randomized: false,
        keys: &["a", "n_nodes", "t_final", "steps", "scheme"],
    },
    CatalogEntry {
        name: "exponent-fit",
        description: "log-log boundary-exponent fit of a distance profile",
        claim: "boundary-exponent: least-squares recovery of the power a",
        randomized: false,
        keys: &["a", "n_nodes", "profile"],
    },
    CatalogEntry {
        name: "markov",
        description: "energy decrease of the discrete form under unit clipping",
        claim: "dirichlet-form: Markovian property of the quadratic form",
        randomized: true,
        keys: &["a", "n_nodes", "trials"],
    },
    CatalogEntry {
        name: "contraction",
        description: "Lp contraction of the discrete semigroup on random data",
        claim: "semigroup: Lp-contractive positivity-preserving evolution",
        randomized: true,
        keys: &["a", "n_nodes", "p", "trials"],
    },
    CatalogEntry {
        name: "max-regularity",
        description: "space-time maximal-regularity ratio, stable under refinement",
        claim: "maximal-regularity: Lp bound on time derivative and operator part",
        randomized: true,
        keys: &["a", "p", "trials", "levels", "t_final", "steps"],
    },
    CatalogEntry {
        name: "interior-lift",
        description: "interior vs boundary-window regularity of a heat run",
        claim: "interior-lifting: solutions exceed the boundary-limited scale inside",
        randomized: false,
        keys: &["a", "n_nodes", "t_final", "steps", "window_center", "window_radius", "p", "scan_base"],
    },
];

pub fn catalog_entry(name: &str) -> Option<&'static CatalogEntry> {
    CATALOG.iter().find(|e| e.name == name)
}

/// Full schema validation: experiment name, version, unknown keys, ranges,
/// and seed presence for randomized experiments.
pub fn validate(config: &ExperimentConfig) -> Result<(), ConfigError> {
    if config.schema_version != SCHEMA_VERSION {
        return Err(ConfigError::Schema(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            config.schema_version
        )));
    }
    let entry = catalog_entry(&config.experiment).ok_or_else(|| {
        ConfigError::Schema(format!(
            "unknown experiment `{}` (see `list`)",
            config.experiment
        ))
    })?;
    for key in config.params.keys() {
        if !entry.keys.contains(&key.as_str()) {
            return Err(ConfigError::Schema(format!(
                "unknown parameter `{key}` for experiment `{}`",
                entry.name
            )));
        }
    }
    if entry.randomized {
        config.seed_required()?;
    }
    if let Some(v) = config.params.get("a") {
        let a = match v {
            toml::Value::Float(x) => *x,
            toml::Value::Integer(i) => *i as f64,
            _ => return Err(ConfigError::Schema("a must be a number".into())),
        };
        if !(0.0 < a && a < 1.0) {
            return Err(ConfigError::Schema(format!("a must lie in (0,1), got {a}")));
        }
    }
    if let Some(v) = config.params.get("d") {
        let d = match v {
            toml::Value::Float(x) => *x,
            toml::Value::Integer(i) => *i as f64,
            _ => return Err(ConfigError::Schema("d must be a number".into())),
        };
        if !(0.0 < d && d <= 2.0) {
            return Err(ConfigError::Schema(format!(
                "d must lie in (0,2], got {d}"
            )));
        }
    }
    if let Some(v) = config.params.get("p") {
        let p = match v {
            toml::Value::Float(x) => *x,
            toml::Value::Integer(i) => *i as f64,
            _ => return Err(ConfigError::Schema("p must be a number".into())),
        };
        if !(p > 1.0 && p.is_finite()) {
            return Err(ConfigError::Schema(format!(
                "p must lie in (1,inf), got {p}"
            )));
        }
    }
    for key in ["grid_n", "scan_base"] {
        if let Some(toml::Value::Integer(i)) = config.params.get(key) {
            let n = *i as usize;
            if n == 0 || (n & (n - 1)) != 0 || n > 4096 {
                return Err(ConfigError::Schema(format!(
                    "{key} must be a power of two <= 4096, got {n}"
                )));
            }
        }
    }
    if let Some(toml::Value::Integer(i)) = config.params.get("n_nodes") {
        if *i < 16 || *i > 4096 {
            return Err(ConfigError::Schema(format!(
                "n_nodes must lie in [16, 4096], got {i}"
            )));
        }
    }
    Ok(())
}
