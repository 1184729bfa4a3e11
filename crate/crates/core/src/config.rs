//! Flat `key = value` configuration text with dotted section paths.
//!
//! ```text
//! # comment
//! experiment = converge
//! model.kind = brownian
//! model.sigma = 1.0
//! run.n_values = 16, 32, 64
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Ordered key-value map. Serialises back to canonical text with keys in
/// lexicographic order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

impl KvMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(config_err(
                    &format!("line {}", lineno + 1),
                    "expected `key = value`",
                ));
            };
            let key = k.trim();
            if key.is_empty() || key.split('.').any(str::is_empty) {
                return Err(config_err(key, "malformed key"));
            }
            if map.entries.contains_key(key) {
                return Err(config_err(key, "duplicate key"));
            }
            map.entries.insert(key.to_string(), v.trim().to_string());
        }
        Ok(map)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require_str(&self, key: &str) -> Result<&str> {
        self.get_str(key)
            .ok_or_else(|| config_err(key, "missing required key"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| config_err(key, format!("cannot parse `{v}`"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| config_err(key, "missing required key"))
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) if v.trim().is_empty() => Ok(Some(Vec::new())),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<T>()
                        .map_err(|_| config_err(key, format!("cannot parse list item `{}`", s.trim())))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    /// Entries under `prefix.`, with the prefix stripped.
    pub fn section(&self, prefix: &str) -> KvMap {
        let dotted = format!("{prefix}.");
        KvMap {
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(&dotted).map(|s| (s.to_string(), v.clone())))
                .collect(),
        }
    }

    /// Inserts all entries of `other` under `prefix.`.
    pub fn merge_section(&mut self, prefix: &str, other: &KvMap) {
        for (k, v) in &other.entries {
            self.entries.insert(format!("{prefix}.{k}"), v.clone());
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl fmt::Display for KvMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Joins numbers as a comma-separated list using shortest round-trip
/// formatting.
pub fn join_list<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_lookup() {
        let kv = KvMap::parse("# hi\na.b = 1.5\n\nc = x, y\nn = 1,2,3\n").unwrap();
        assert_eq!(kv.require::<f64>("a.b").unwrap(), 1.5);
        assert_eq!(kv.get_str("c"), Some("x, y"));
        assert_eq!(kv.get_list::<u32>("n").unwrap().unwrap(), vec![1, 2, 3]);
        assert_eq!(kv.section("a").require::<f64>("b").unwrap(), 1.5);
    }

    #[test]
    fn errors_carry_key_path() {
        let kv = KvMap::parse("run.paths = many").unwrap();
        match kv.require::<usize>("run.paths") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "run.paths"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            kv.require::<u64>("run.seed"),
            Err(Error::Config { .. })
        ));
        assert!(KvMap::parse("novalue").is_err());
        assert!(KvMap::parse("a = 1\na = 2").is_err());
    }

    #[test]
    fn display_round_trips() {
        let kv = KvMap::parse("z = 1\na.b = two\n").unwrap();
        let again = KvMap::parse(&kv.to_string()).unwrap();
        assert_eq!(kv, again);
        assert_eq!(kv.to_string(), "a.b = two\nz = 1\n");
    }
}
