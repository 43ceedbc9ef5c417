//! Plain-text `key = value` defaults, overridden by explicit flags.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

/// Keys are compared with `_` and `-` treated alike.
fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key = value, got {raw:?}", n + 1);
            };
            let key = normalize(key);
            if values.insert(key.clone(), value.trim().to_owned()).is_some() {
                bail!("line {}: key {key:?} given twice", n + 1);
            }
        }
        Ok(ConfigFile {
            values,
            used: RefCell::default(),
        })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let key = normalize(key);
        let value = self.values.get(&key)?;
        self.used.borrow_mut().insert(key);
        Some(value)
    }

    /// The flag value if given, otherwise the config value, otherwise `None`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let from_file = match self.raw(key) {
            Some(v) => Some(v.parse::<T>().map_err(|e| anyhow::anyhow!("config key {key}: {e}"))?),
            None => None,
        };
        Ok(flag.or(from_file))
    }

    pub fn pick_or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    /// Like [`pick`](Self::pick) for comma-separated lists.
    pub fn pick_list<T>(&self, flag: Option<Vec<T>>, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let from_file = match self.raw(key) {
            Some(v) => Some(parse_list(v).with_context(|| format!("config key {key}"))?),
            None => None,
        };
        Ok(flag.or(from_file))
    }

    /// Fails on keys that no option of the running command consumed.
    pub fn ensure_all_used(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .values
            .keys()
            .filter(|k| !used.contains(*k))
            .map(String::as_str)
            .collect();
        if !unknown.is_empty() {
            bail!("config keys not recognised by this command: {}", unknown.join(", "));
        }
        Ok(())
    }
}

pub fn parse_list<T>(s: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| anyhow::anyhow!("{t:?}: {e}")))
        .collect()
}
