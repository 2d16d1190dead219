//! Layered run configuration: defaults, then a TOML file, then command-line
//! flags, then `--set key=value` overrides.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use mvsense::dataset::{DatasetConfig, Split};
use mvsense::inversion::{BimConfig, Variant};

use crate::CliError;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "MVSENSE_OUTPUT_ROOT";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructConfig {
    pub method: Variant,
    pub bim: BimConfig,
    /// Pilot SNR in dB; ignored when `noiseless` is set.
    pub snr_db: f64,
    pub noiseless: bool,
    pub pilots: usize,
    /// Seed of the pilot noise and of point sampling from reconstructions.
    pub seed: u64,
    pub split: Split,
    /// Reconstruct at most this many samples of the split.
    pub limit: Option<usize>,
    /// Use only the first `[B, U]` base stations and UEs.
    pub views: Option<[usize; 2]>,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        ReconstructConfig {
            method: Variant::BimCs,
            bim: BimConfig::default(),
            snr_db: 20.0,
            noiseless: false,
            pilots: 32,
            seed: 0,
            split: Split::Test,
            limit: None,
            views: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub split: Split,
    /// Seed for sampling points from predictions stored as images.
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            split: Split::Test,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub reconstruct: ReconstructConfig,
    pub eval: EvalConfig,
}

/// What was run and with which fully resolved settings.
#[derive(Clone, Debug, Serialize)]
pub struct RunSnapshot<'a> {
    pub command: &'a str,
    pub config_file: Option<&'a Path>,
    pub output_dir: &'a Path,
    pub overrides: &'a [String],
    pub config: &'a RunConfig,
}

/// Parse a `--set` value as TOML, falling back to a bare string.
fn parse_value(text: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {text}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(text.into())),
        Err(_) => toml::Value::String(text.into()),
    }
}

fn set_path(root: &mut toml::Value, key: &str, value: toml::Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("malformed key {key:?}")));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{key}: {part} is not a table")))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| CliError::Config(format!("{key}: parent is not a table")))?;
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn merge(base: &mut toml::Value, layer: toml::Value) {
    match (base, layer) {
        (toml::Value::Table(b), toml::Value::Table(l)) => {
            for (k, v) in l {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Build the effective configuration.
///
/// `flags` are `(dotted key, value)` pairs from dedicated command-line
/// options; `overrides` are raw `key=value` strings applied last.
pub fn resolve(
    file: Option<&Path>,
    flags: Vec<(&str, toml::Value)>,
    overrides: &[String],
) -> Result<RunConfig, CliError> {
    let mut tree = toml::Value::try_from(RunConfig::default())
        .map_err(|e| CliError::Config(format!("default configuration: {e}")))?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let layer: toml::Table =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        merge(&mut tree, toml::Value::Table(layer));
    }
    for (key, value) in flags {
        set_path(&mut tree, key, value)?;
    }
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override {item:?} is not key=value")))?;
        set_path(&mut tree, key.trim(), parse_value(value.trim()))?;
    }
    tree.try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("configuration: {e}")))
}

/// `--out` when given, else `$MVSENSE_OUTPUT_ROOT/<default_name>`.
pub fn output_dir(out: Option<PathBuf>, default_name: &str) -> Result<PathBuf, CliError> {
    if let Some(out) = out {
        return Ok(out);
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => Ok(PathBuf::from(root).join(default_name)),
        _ => Err(CliError::Config(format!(
            "no output directory: pass --out or set {OUTPUT_ROOT_ENV}"
        ))),
    }
}

pub fn write_snapshot(dir: &Path, snapshot: &RunSnapshot<'_>) -> Result<(), CliError> {
    let text = toml::to_string_pretty(snapshot).map_err(|e| CliError::Config(format!("snapshot: {e}")))?;
    std::fs::write(dir.join(RESOLVED_CONFIG_FILE), text).map_err(|e| CliError::Run(e.into()))
}
