//! Resolved run settings: a flat string map assembled from command-line
//! flags, an optional key=value config file, and built-in defaults (flags
//! win over the file, the file over defaults). The resolved map is echoed
//! verbatim into the run manifest, which makes any run repeatable from its
//! manifest alone.

use npts_core::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    pub fn new() -> Self {
        Settings::default()
    }

    pub fn from_map(map: BTreeMap<String, String>) -> Self {
        Settings { map }
    }

    pub fn map(&self) -> &BTreeMap<String, String> {
        &self.map
    }

    /// Insert a resolved value: explicit flag first, then the config file,
    /// then the default. `None` defaults leave the key unset.
    pub fn resolve(
        &mut self,
        key: &str,
        flag: Option<String>,
        file: &BTreeMap<String, String>,
        default: Option<&str>,
    ) {
        let value = flag
            .or_else(|| file.get(key).cloned())
            .or_else(|| default.map(str::to_string));
        if let Some(v) = value {
            self.map.insert(key.to_string(), v);
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::InvalidArgument(format!("missing required setting `{key}`")))
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    Error::InvalidArgument(format!("setting `{key}` is not a number: `{v}`"))
                })
            })
            .transpose()
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.require(key)?;
        Ok(self.get_f64(key)?.expect("presence checked"))
    }

    pub fn require_u64(&self, key: &str) -> Result<u64> {
        let v = self.require(key)?;
        v.parse::<u64>().map_err(|_| {
            Error::InvalidArgument(format!("setting `{key}` is not an integer: `{v}`"))
        })
    }

    pub fn require_usize(&self, key: &str) -> Result<usize> {
        let v = self.require(key)?;
        v.parse::<usize>().map_err(|_| {
            Error::InvalidArgument(format!("setting `{key}` is not an integer: `{v}`"))
        })
    }

    pub fn get_bool(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            None => Ok(false),
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(Error::InvalidArgument(format!(
                    "setting `{key}` is not a boolean: `{other}`"
                ))),
            },
        }
    }

    pub fn require_f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.require(key)?;
        raw.split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidArgument(format!("setting `{key}` has a bad entry: `{s}`"))
                })
            })
            .collect()
    }

    pub fn require_usize_list(&self, key: &str) -> Result<Vec<usize>> {
        let raw = self.require(key)?;
        raw.split(',')
            .map(|s| {
                s.trim().parse::<usize>().map_err(|_| {
                    Error::InvalidArgument(format!("setting `{key}` has a bad entry: `{s}`"))
                })
            })
            .collect()
    }
}

/// Parse a flat `key = value` config file. `#` starts a comment; blank lines
/// are ignored.
pub fn load_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: path.display().to_string(),
                row: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}
