//! Run manifests: a JSON echo of the resolved configuration plus build and
//! timing metadata. Re-running a manifest reproduces the run's artifacts
//! byte for byte (timestamp fields aside).

use crate::settings::Settings;
use npts_core::{Error, Result};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

pub fn write_manifest(
    path: &Path,
    command: &str,
    settings: &Settings,
    wall_time_ms: u128,
) -> Result<()> {
    let created_unix_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let seed = settings
        .get("seed")
        .and_then(|s| s.parse::<u64>().ok())
        .map(Value::from)
        .unwrap_or(Value::Null);
    let doc = json!({
        "command": command,
        "config": settings.map(),
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_ms": wall_time_ms as u64,
        "created_unix_ms": created_unix_ms as u64,
    });
    std::fs::write(path, format!("{:#}\n", doc))?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<(String, Settings)> {
    let text = std::fs::read_to_string(path)?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        row: 0,
        message: format!("invalid manifest JSON: {e}"),
    })?;
    let command = doc
        .get("command")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            row: 0,
            message: "manifest is missing `command`".into(),
        })?
        .to_string();
    let config = doc
        .get("config")
        .and_then(Value::as_object)
        .ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            row: 0,
            message: "manifest is missing `config`".into(),
        })?;
    let mut map = BTreeMap::new();
    for (k, v) in config {
        let value = v
            .as_str()
            .map(str::to_string)
            .unwrap_or_else(|| v.to_string());
        map.insert(k.clone(), value);
    }
    Ok((command, Settings::from_map(map)))
}
