//! Flat `key = value` experiment configuration.
//!
//! Lines are UTF-8, `#` starts a comment, blank lines are ignored, and a
//! later assignment to the same key replaces an earlier one. Overrides
//! (from command-line flags) are applied after the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::exec::Execution;
use crate::experiment::{ExperimentConfig, ModelConfig};
use crate::model::DiscreteHmmModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl ConfigError {
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::Parse { .. } => "ParseError",
            ConfigError::Validation { .. } => "ValidationError",
            ConfigError::Io { .. } => "IoError",
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("model", &[]),
    ("T", &["horizon"]),
    ("m", &["particles"]),
    ("m_oracle", &["oracle_particles"]),
    ("R", &["reps"]),
    ("seed", &["master_seed"]),
    ("bins", &[]),
    ("retain_diagnostics", &[]),
    ("regenerate_data", &[]),
    ("m_list", &[]),
    ("out", &["output"]),
    ("execution", &[]),
    ("sv_mu", &[]),
    ("sv_phi", &[]),
    ("sv_p", &[]),
    ("hmm_values", &[]),
    ("hmm_initial", &[]),
    ("hmm_transition", &[]),
    ("hmm_emission", &[]),
];

/// Maps a key or one of its aliases to its canonical spelling.
pub fn canonical_key(key: &str) -> Option<&'static str> {
    KEYS.iter()
        .find(|(name, aliases)| *name == key || aliases.contains(&key))
        .map(|(name, _)| *name)
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_lines(text: &str) -> Result<BTreeMap<&'static str, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: idx + 1,
            message: format!("expected `key = value`, found `{line}`"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Parse {
                line: idx + 1,
                message: "missing key".into(),
            });
        }
        let name = canonical_key(key).ok_or_else(|| invalid(key, "unknown key"))?;
        out.insert(name, value.trim().to_string());
    }
    Ok(out)
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| invalid(key, format!("cannot parse `{value}`")))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value.split(',').map(|v| number(key, v.trim())).collect()
}

fn matrix(key: &str, value: &str) -> Result<Vec<Vec<f64>>, ConfigError> {
    value.split(';').map(|row| list(key, row)).collect()
}

fn flag(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(invalid(key, format!("expected a boolean, found `{value}`"))),
    }
}

/// Reads `path` (when given), applies `overrides`, fills defaults, and validates.
pub fn parse_config(
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| ConfigError::Io {
            path: p.to_path_buf(),
            message: e.to_string(),
        })?,
        None => String::new(),
    };
    parse_config_str(&text, overrides)
}

pub fn parse_config_str(
    text: &str,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig, ConfigError> {
    let mut values = parse_lines(text)?;
    for (key, value) in overrides {
        let name = canonical_key(key).ok_or_else(|| invalid(key, "unknown key"))?;
        values.insert(name, value.clone());
    }

    let mut cfg = ExperimentConfig::default();
    for (&key, value) in &values {
        match key {
            "T" => cfg.horizon = number(key, value)?,
            "m" => cfg.particles = number(key, value)?,
            "m_oracle" => cfg.oracle_particles = number(key, value)?,
            "R" => cfg.reps = number(key, value)?,
            "seed" => cfg.master_seed = Some(number(key, value)?),
            "bins" => cfg.bins = number(key, value)?,
            "retain_diagnostics" => cfg.retain_diagnostics = flag(key, value)?,
            "regenerate_data" => cfg.regenerate_data = flag(key, value)?,
            "m_list" => {
                cfg.m_list = value
                    .split(',')
                    .map(|v| number(key, v.trim()))
                    .collect::<Result<_, _>>()?
            }
            "out" => cfg.output = PathBuf::from(value),
            "execution" => {
                cfg.execution = match value.as_str() {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    other => return Err(invalid(key, format!("unknown strategy `{other}`"))),
                }
            }
            _ => {}
        }
    }
    cfg.model = build_model(&values)?;
    cfg.validate()
        .map_err(|(key, message)| invalid(key, message))?;
    Ok(cfg)
}

fn build_model(values: &BTreeMap<&'static str, String>) -> Result<ModelConfig, ConfigError> {
    let name = values.get("model").map_or("linear_uniform", String::as_str);
    match name {
        "linear_uniform" => Ok(ModelConfig::LinearUniform),
        "stoch_vol" => {
            let phi = values
                .get("sv_phi")
                .map_or(Ok(0.5), |v| number("sv_phi", v))?;
            let p: Option<usize> = values.get("sv_p").map(|v| number("sv_p", v)).transpose()?;
            let mu = match values.get("sv_mu") {
                Some(v) => list("sv_mu", v)?,
                None => vec![0.0; p.unwrap_or(3)],
            };
            if let Some(p) = p {
                if p != mu.len() {
                    return Err(invalid("sv_p", format!("sv_mu has {} entries", mu.len())));
                }
            }
            crate::model::StochVolModel::new(mu.clone(), phi)
                .map_err(|e| invalid("sv_phi", e.to_string()))?;
            Ok(ModelConfig::StochVol { mu, phi })
        }
        "discrete_hmm" => {
            let reference = DiscreteHmmModel::two_state();
            let get_list = |key: &str, default: &[f64]| -> Result<Vec<f64>, ConfigError> {
                values.get(key).map_or(Ok(default.to_vec()), |v| list(key, v))
            };
            let get_matrix = |key: &str, default: &[Vec<f64>]| {
                values
                    .get(key)
                    .map_or(Ok(default.to_vec()), |v| matrix(key, v))
            };
            let hmm = DiscreteHmmModel::new(
                get_list("hmm_values", reference.values())?,
                get_list("hmm_initial", reference.initial())?,
                get_matrix("hmm_transition", reference.transition())?,
                get_matrix("hmm_emission", reference.emission())?,
            )
            .map_err(|e| invalid("hmm_transition", e.to_string()))?;
            Ok(ModelConfig::DiscreteHmm(hmm))
        }
        other => Err(invalid("model", format!("unknown model `{other}`"))),
    }
}
