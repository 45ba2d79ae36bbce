//! Flat key-value config files mirroring the CLI flags.
//!
//! One `key = value` pair per line, `#` comments; explicit flags always win
//! over file values.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

const KNOWN_KEYS: [&str; 16] = [
    "dataset",
    "test",
    "learner",
    "nb-smoothing",
    "k",
    "n-classifiers",
    "alpha",
    "seed",
    "attack",
    "out",
    "classes",
    "budget",
    "r-max",
    "votes",
    "certificates",
    "truth",
];

#[derive(Debug, Default)]
pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut values = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    lineno + 1
                );
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("{}:{}: unknown config key `{key}`", path.display(), lineno + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    fn parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key `{key}` = `{raw}`: {e}")),
        }
    }

    /// Flag value if given, else config value, else the default.
    pub fn resolve<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(flag.or(self.parsed(key)?).unwrap_or(default))
    }

    /// Flag value if given, else config value, else `None`.
    pub fn resolve_opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(flag.or(self.parsed(key)?))
    }

    /// Like [`FileConfig::resolve`] but a missing value is an error.
    pub fn resolve_required<T>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.resolve_opt(flag, key)?
            .ok_or_else(|| anyhow::anyhow!("missing required option --{key}"))
    }
}
