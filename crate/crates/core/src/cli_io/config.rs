//! JSON configuration with recorded defaults.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{LabError, Result};
use crate::experiments::{
    BaseConfig, SweepGrid, DEFAULT_LOG_STRIDE, DEFAULT_M, DEFAULT_N_TEST, DEFAULT_Q, DEFAULT_SIGMA_0,
    DEFAULT_SNAPSHOT_STRIDE,
};

pub const REQUIRED_KEYS: [&str; 8] = ["d", "n", "mu_scale", "sigma_p", "p", "eta", "steps", "seed"];

/// Optional keys and their defaults.
pub fn default_values() -> Vec<(&'static str, Value)> {
    vec![
        ("m", DEFAULT_M.into()),
        ("q", DEFAULT_Q.into()),
        ("sigma_0", DEFAULT_SIGMA_0.into()),
        ("log_stride", DEFAULT_LOG_STRIDE.into()),
        ("n_test", DEFAULT_N_TEST.into()),
        ("snapshot_stride", DEFAULT_SNAPSHOT_STRIDE.into()),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedConfig {
    pub config: BaseConfig,
    /// Keys filled from defaults, in declaration order.
    pub defaults_applied: Vec<String>,
    pub source: Option<PathBuf>,
}

fn config_err(key: &str, message: impl Into<String>) -> LabError {
    LabError::Config { key: key.into(), message: message.into() }
}

fn as_object(text: &str) -> Result<Map<String, Value>> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(config_err("<root>", "expected a JSON object")),
        Err(e) => Err(config_err("<root>", format!("malformed JSON: {e}"))),
    }
}

fn field<T: DeserializeOwned>(map: &Map<String, Value>, key: &str) -> Result<T> {
    let v = map.get(key).ok_or_else(|| config_err(key, "missing required key"))?;
    serde_json::from_value(v.clone()).map_err(|e| config_err(key, e.to_string()))
}

/// `key=value` where value is JSON; bare words are taken as strings.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s.split_once('=').ok_or_else(|| config_err(s, "override must look like key=value"))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.into()));
    Ok((k.trim().into(), value))
}

/// Parse config text, apply overrides, fill defaults and validate.
pub fn parse_config_str(text: &str, overrides: &[(String, Value)]) -> Result<ParsedConfig> {
    let mut map = as_object(text)?;
    for (k, v) in overrides {
        map.insert(k.clone(), v.clone());
    }
    config_from_map(map)
}

fn config_from_map(mut map: Map<String, Value>) -> Result<ParsedConfig> {
    let defaults = default_values();
    for key in map.keys() {
        if !REQUIRED_KEYS.contains(&key.as_str()) && !defaults.iter().any(|(k, _)| k == key) {
            return Err(config_err(key, "unknown key"));
        }
    }
    let mut defaults_applied = Vec::new();
    for (k, v) in defaults {
        if !map.contains_key(k) {
            map.insert(k.into(), v);
            defaults_applied.push(k.to_string());
        }
    }
    let config = BaseConfig {
        d: field(&map, "d")?,
        n: field(&map, "n")?,
        mu_scale: field(&map, "mu_scale")?,
        sigma_p: field(&map, "sigma_p")?,
        p: field(&map, "p")?,
        eta: field(&map, "eta")?,
        steps: field(&map, "steps")?,
        seed: field(&map, "seed")?,
        m: field(&map, "m")?,
        q: field(&map, "q")?,
        sigma_0: field(&map, "sigma_0")?,
        log_stride: field(&map, "log_stride")?,
        n_test: field(&map, "n_test")?,
        snapshot_stride: field(&map, "snapshot_stride")?,
    };
    config.validate()?;
    Ok(ParsedConfig { config, defaults_applied, source: None })
}

pub fn parse_config(path: &Path, overrides: &[(String, Value)]) -> Result<ParsedConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut parsed = parse_config_str(&text, overrides)?;
    parsed.source = Some(path.to_path_buf());
    Ok(parsed)
}

/// The dynamics preset with overrides applied.
pub fn preset_config(seed: u64, overrides: &[(String, Value)]) -> Result<ParsedConfig> {
    let mut parsed = parse_config_str(&config_to_json(&BaseConfig::reference(seed))?, overrides)?;
    parsed.defaults_applied = vec!["<all: built-in preset>".into()];
    Ok(parsed)
}

/// Full config as pretty JSON; parses back to the same value.
pub fn config_to_json(config: &BaseConfig) -> Result<String> {
    Ok(serde_json::to_string_pretty(config)?)
}

/// Heatmap grid: keys not given keep the `base` grid's values.
pub fn parse_grid_str(text: &str, base: &SweepGrid, overrides: &[(String, Value)]) -> Result<SweepGrid> {
    let mut map = match serde_json::to_value(base)? {
        Value::Object(m) => m,
        _ => unreachable!("grid serializes to an object"),
    };
    let mut user = as_object(text)?;
    for (k, v) in overrides {
        user.insert(k.clone(), v.clone());
    }
    for (k, v) in user {
        if !map.contains_key(&k) {
            return Err(config_err(&k, "unknown key"));
        }
        map.insert(k, v);
    }
    let grid: SweepGrid = serde_json::from_value(Value::Object(map)).map_err(|e| config_err("<grid>", e.to_string()))?;
    grid.validate()?;
    Ok(grid)
}
