//! Line-oriented `key = value` text used for run files and config files.
//!
//! ```text
//! # comment
//! method = wann
//! seed = 7
//! curve = 1.0000000000000000e0,5.0000000000000000e-1
//! ```
//!
//! Blank lines and lines starting with `#` are skipped. Keys are lowercase
//! ASCII letters, digits, `_` and `-`, and may appear once. Everything after
//! the first `=` (trimmed) is the value. Lists are comma separated.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Real number with 17 significant digits, enough to round-trip any `f64`.
pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Record {
    entries: Vec<(String, String)>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends or replaces `key`. Newlines in the value are replaced by spaces.
    pub fn set(&mut self, key: &str, value: impl fmt::Display) {
        debug_assert!(valid_key(key), "invalid key {key:?}");
        let value = value.to_string().replace(['\n', '\r'], " ");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_owned(), value)),
        }
    }

    pub fn set_real(&mut self, key: &str, v: f64) {
        self.set(key, format_real(v));
    }

    pub fn set_reals(&mut self, key: &str, values: &[f64]) {
        let joined: Vec<String> = values.iter().map(|v| format_real(*v)).collect();
        self.set(key, joined.join(","));
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Record {
            line: 0,
            message: format!("missing key `{key}`"),
        })
    }

    /// Parses the value of `key`, if present.
    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|_| Error::Record {
                    line: 0,
                    message: format!("cannot parse `{key}` value {v:?}"),
                })
            })
            .transpose()
    }

    pub fn parse_required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse(key)?.ok_or_else(|| Error::Record {
            line: 0,
            message: format!("missing key `{key}`"),
        })
    }

    /// Comma-separated list; an empty value is an empty list.
    pub fn parse_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.get(key)
            .map(|v| {
                if v.trim().is_empty() {
                    return Ok(Vec::new());
                }
                v.split(',')
                    .map(|item| {
                        item.trim().parse::<T>().map_err(|_| Error::Record {
                            line: 0,
                            message: format!("cannot parse item {item:?} of `{key}`"),
                        })
                    })
                    .collect()
            })
            .transpose()
    }
}

impl FromStr for Record {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut record = Record::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Record { line: k + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let key = key.trim();
            if !valid_key(key) {
                return Err(err(format!("invalid key {key:?}")));
            }
            if record.get(key).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
            record.entries.push((key.to_owned(), value.trim().to_owned()));
        }
        Ok(record)
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
