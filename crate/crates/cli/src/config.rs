//! `key = value` configuration files and flag merging.
//!
//! Keys are the long flag names without the leading dashes. A key may appear
//! more than once for list-valued settings such as `order`. Flags given on the
//! command line replace the file's values for that key.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, Result};

pub const KNOWN_KEYS: &[&str] = &[
    "input",
    "column",
    "transform",
    "order",
    "boot",
    "seed",
    "shrink",
    "cn-scale",
    "lbq",
    "out",
    "max-lag",
    "dgp",
    "phi",
    "n",
    "reps",
    "levels",
    "mode",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, Vec<String>>,
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("line {}: expected key = value", k + 1)))?;
            let key = normalize_key(key);
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "line {}: unknown key '{key}'",
                    k + 1
                )));
            }
            values
                .entry(key)
                .or_default()
                .push(value.trim().to_string());
        }
        Ok(Settings { values })
    }

    /// Replaces `key` with the flag values, if any were given.
    pub fn override_with<I, S>(&mut self, key: &str, flag: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let given: Vec<String> = flag.into_iter().map(Into::into).collect();
        if !given.is_empty() {
            self.values.insert(normalize_key(key), given);
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values
            .get(key)
            .and_then(|v| v.last())
            .map(String::as_str)
    }

    pub fn get_all(&self, key: &str) -> &[String] {
        self.values.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.get(key).map(|v| parse_value(key, v)).transpose()
    }

    pub fn parsed_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// Every value of `key` split on commas, semicolons or whitespace as
    /// requested by `sep`.
    pub fn list<T>(&self, key: &str, sep: &[char]) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let all = self.get_all(key);
        if all.is_empty() {
            return Ok(None);
        }
        let mut out = Vec::new();
        for v in all {
            for part in v
                .split(|c: char| sep.contains(&c))
                .map(str::trim)
                .filter(|p| !p.is_empty())
            {
                out.push(parse_value(key, part)?);
            }
        }
        Ok(Some(out))
    }
}

fn normalize_key(key: &str) -> String {
    key.trim()
        .trim_start_matches('-')
        .replace('_', "-")
        .to_ascii_lowercase()
}

fn parse_value<T>(key: &str, v: &str) -> Result<T>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid value '{v}' for --{key}: {e}")))
}

/// `on`/`off` switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Switch(pub bool);

impl FromStr for Switch {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "on" | "true" | "yes" | "1" => Ok(Switch(true)),
            "off" | "false" | "no" | "0" => Ok(Switch(false)),
            _ => Err("expected on or off".into()),
        }
    }
}
