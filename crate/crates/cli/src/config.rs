//! Optional JSON configuration and the output-directory override.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use crate::error::CliError;

pub const OUT_DIR_ENV: &str = "LOADSMITH_OUT_DIR";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub equilibrium: EquilibriumDefaults,
    /// Point name to node id, used when `--node-map` is absent.
    #[serde(default)]
    pub node_map: Option<BTreeMap<String, u32>>,
    #[serde(default)]
    pub widen_tol: Option<f64>,
    /// Judge adapters, in the `{"adapters": {...}}` registry format.
    #[serde(default)]
    pub judges: Option<Value>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumDefaults {
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config, CliError> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CliError::infra(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&raw)
            .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Explicit flag, else `$LOADSMITH_OUT_DIR/<fallback>`, else `<fallback>`.
pub fn output_dir(explicit: Option<&Path>, fallback: &str) -> PathBuf {
    match (explicit, std::env::var_os(OUT_DIR_ENV)) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(root)) if !root.is_empty() => PathBuf::from(root).join(fallback),
        _ => PathBuf::from(fallback),
    }
}
