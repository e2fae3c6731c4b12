//! Flat `key = value` configuration files.
//!
//! One entry per line, `#` starts a comment, vectors are comma-separated.
//! Keys are case-sensitive and may appear only once.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "empty key".into(),
                });
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn require_raw(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("invalid value for `{key}`: {v:?}")))
            })
            .transpose()
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.require_raw(key)?;
        v.parse::<T>()
            .map_err(|_| Error::Config(format!("invalid value for `{key}`: {v:?}")))
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<T>().map_err(|_| {
                            Error::Config(format!("invalid list element for `{key}`: {s:?}"))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn require_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.get_list(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        self.raw(key)
            .map(|v| match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(Error::Config(format!(
                    "invalid boolean for `{key}`: {other:?}"
                ))),
            })
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalars_lists_and_comments() {
        let cfg =
            KvConfig::parse("# header\nframes = 12\nbands=1, 2 ,3 # trailing\n\nflag = yes\n")
                .unwrap();
        assert_eq!(cfg.require::<usize>("frames").unwrap(), 12);
        assert_eq!(cfg.require_list::<usize>("bands").unwrap(), vec![1, 2, 3]);
        assert_eq!(cfg.get_bool("flag").unwrap(), Some(true));
        assert!(cfg.get::<f64>("absent").unwrap().is_none());
    }

    #[test]
    fn missing_key_is_named() {
        let cfg = KvConfig::parse("a = 1").unwrap();
        let err = cfg.require::<usize>("rows").unwrap_err();
        assert!(err.to_string().contains("`rows`"));
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert!(matches!(
            KvConfig::parse("a = 1\na = 2"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            KvConfig::parse("just words"),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
