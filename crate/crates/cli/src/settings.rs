//! Resolved option values: command-line flags over a key-value config file
//! over built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Keys accepted on the command line and in config files.
pub const KEYS: &[&str] = &[
    "n",
    "kappa",
    "rho",
    "noise-sigma",
    "p",
    "protocol",
    "theta",
    "runs",
    "seed",
    "tau-max",
    "tau-step",
    "tau-count",
    "eps",
    "maxiter",
    "out",
    "instance",
    "scenarios",
];

pub const OUT_DIR_ENV: &str = "DAMP_OUT_DIR";

#[derive(Debug, Default)]
pub struct Settings {
    flags: BTreeMap<String, String>,
    file: BTreeMap<String, (String, String)>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

/// Parse `key = value` lines. `#` starts a comment.
pub fn parse_config(text: &str, origin: &str) -> Result<BTreeMap<String, (String, String)>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let location = format!("{origin}:{}", i + 1);
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{location}: expected `key = value`, found `{line}`"))?;
        let key = normalize(key);
        if !KEYS.contains(&key.as_str()) {
            bail!("{location}: unknown key `{key}`");
        }
        let value = value.trim();
        if value.is_empty() {
            bail!("{location}: `{key}` has no value");
        }
        if out
            .insert(key.clone(), (value.to_string(), location.clone()))
            .is_some()
        {
            bail!("{location}: `{key}` given twice");
        }
    }
    Ok(out)
}

impl Settings {
    pub fn new(flags: BTreeMap<String, String>, config: Option<&Path>) -> Result<Self> {
        let file = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config file {}", path.display()))?;
                parse_config(&text, &path.display().to_string())?
            }
            None => BTreeMap::new(),
        };
        Ok(Self { flags, file })
    }

    /// Raw value and where it came from.
    fn raw(&self, key: &str) -> Option<(&str, String)> {
        if let Some(v) = self.flags.get(key) {
            return Some((v, format!("--{key}")));
        }
        self.file
            .get(key)
            .map(|(v, loc)| (v.as_str(), format!("{loc}: {key}")))
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.raw(key).is_some()
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.raw(key)
            .map(|(v, origin)| {
                v.trim()
                    .parse::<T>()
                    .map_err(|e| anyhow!("{origin}: invalid value `{v}`: {e}"))
            })
            .transpose()
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list_or<T>(&self, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T: FromStr + Clone,
        T::Err: Display,
    {
        let Some((v, origin)) = self.raw(key) else {
            return Ok(default.to_vec());
        };
        v.split(',')
            .map(|item| {
                item.trim()
                    .parse::<T>()
                    .map_err(|e| anyhow!("{origin}: invalid list entry `{}`: {e}", item.trim()))
            })
            .collect()
    }

    /// `--out`, then the config file, then `$DAMP_OUT_DIR`, then `.`.
    pub fn out_dir(&self) -> Result<PathBuf> {
        if let Some(p) = self.get::<PathBuf>("out")? {
            return Ok(p);
        }
        Ok(std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from))
    }
}
