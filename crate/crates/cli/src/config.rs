//! Layered configuration: an optional TOML or JSON file, overridden by
//! command-line flags, deserialized into the command's typed config. Every
//! run records the resolved config in a run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{internal, usage, CliError};

pub const RUN_FORMAT_VERSION: u32 = 1;

pub fn read_config_value(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let parsed = match ext.as_str() {
        "toml" => toml::from_str::<Value>(&text).map_err(|e| e.to_string()),
        "json" => serde_json::from_str::<Value>(&text).map_err(|e| e.to_string()),
        _ => serde_json::from_str::<Value>(&text).or_else(|_| toml::from_str::<Value>(&text).map_err(|e| e.to_string())),
    };
    let value = parsed.map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    if !value.is_object() {
        return Err(usage(format!("config {}: top level must be a table", path.display())));
    }
    Ok(value)
}

/// Drops nulls and empty tables so unset flags do not override the file.
pub fn prune(v: Value) -> Option<Value> {
    match v {
        Value::Null => None,
        Value::Object(m) => {
            let m: Map<String, Value> = m.into_iter().filter_map(|(k, v)| prune(v).map(|v| (k, v))).collect();
            (!m.is_empty()).then_some(Value::Object(m))
        }
        Value::Array(a) if a.is_empty() => None,
        other => Some(other),
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Resolves `T` from the config file (if any) overlaid with `overrides`.
pub fn resolve<T: DeserializeOwned>(file: Option<&Path>, overrides: Value) -> Result<T, CliError> {
    let mut base = match file {
        Some(p) => read_config_value(p)?,
        None => Value::Object(Map::new()),
    };
    if let Some(o) = prune(overrides) {
        merge(&mut base, o);
    }
    serde_json::from_value(base).map_err(|e| usage(format!("config: {e}")))
}

#[derive(Serialize)]
struct RunManifest<'a, T: Serialize> {
    format_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a T,
}

/// `<output>.run.json`.
pub fn sidecar(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".run.json");
    output.with_file_name(name)
}

/// Writes the resolved config of this run to `path`. Contains no
/// timestamps, so identical invocations write identical manifests.
pub fn write_run_manifest<T: Serialize>(path: &Path, command: &'static str, config: &T) -> Result<(), CliError> {
    let doc = RunManifest {
        format_version: RUN_FORMAT_VERSION,
        tool: "segqc",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
    };
    write_json(path, &doc)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| internal(format!("{}: {e}", dir.display())))?;
    }
    let mut bytes = serde_json::to_vec_pretty(value).map_err(internal)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| internal(format!("{}: {e}", path.display())))
}

pub fn require_path(p: &Path, flag: &str) -> Result<(), CliError> {
    if p.as_os_str().is_empty() {
        Err(usage(format!("missing {flag}")))
    } else {
        Ok(())
    }
}
