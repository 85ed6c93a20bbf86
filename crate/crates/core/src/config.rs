//! Flat `key = value` configuration text.
//!
//! Blank lines and lines starting with `#` are ignored. Later assignments
//! override earlier ones, so command-line `key=value` overrides can simply be
//! applied after the file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::physics::NoiseModel;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            cfg.apply_override(line)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies one `key=value` assignment.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{assignment}`")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("empty key in `{assignment}`")));
        }
        self.entries.insert(k.to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("cannot parse `{key}` = `{v}`"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Fails on keys outside `allowed`, to catch typos.
    pub fn ensure_known(&self, allowed: &[&str]) -> Result<()> {
        let unknown: Vec<&str> = self
            .entries
            .keys()
            .map(String::as_str)
            .filter(|k| !allowed.contains(k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "unknown keys: {}",
                unknown.join(", ")
            )))
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Config keys of the noise parameters.
pub const NOISE_KEYS: [&str; 6] = [
    "noise.depolarizing",
    "noise.dephasing",
    "noise.flip_x",
    "noise.flip_y",
    "noise.eps01",
    "noise.eps10",
];

impl NoiseModel {
    /// Reads `noise.*` keys; missing keys fall back to `base`.
    pub fn from_config(cfg: &Config, base: &NoiseModel) -> Result<NoiseModel> {
        let n = NoiseModel {
            depolarizing: cfg.get_or(NOISE_KEYS[0], base.depolarizing)?,
            dephasing: cfg.get_or(NOISE_KEYS[1], base.dephasing)?,
            flip_x: cfg.get_or(NOISE_KEYS[2], base.flip_x)?,
            flip_y: cfg.get_or(NOISE_KEYS[3], base.flip_y)?,
            eps01: cfg.get_or(NOISE_KEYS[4], base.eps01)?,
            eps10: cfg.get_or(NOISE_KEYS[5], base.eps10)?,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn to_config(&self) -> Config {
        let mut cfg = Config::default();
        let vals = [
            self.depolarizing,
            self.dephasing,
            self.flip_x,
            self.flip_y,
            self.eps01,
            self.eps10,
        ];
        for (k, v) in NOISE_KEYS.iter().zip(vals) {
            // shortest representation that parses back to the same f64
            cfg.set(k, v);
        }
        cfg
    }
}
