//! Flat `key=value` text files. `#` starts a comment; blank lines are ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", n + 1)))?;
            let key = k.trim().to_string();
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Parse(format!("line {}: duplicate key {key}", n + 1)));
            }
        }
        Ok(KeyValues { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn insert(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Overwrites `target` when `key` is present.
    pub fn set<T: FromStr>(&self, key: &str, target: &mut T) -> Result<()> {
        if let Some(v) = self.entries.get(key) {
            *target = v
                .parse()
                .map_err(|_| Error::Config(format!("invalid value {v:?} for {key}")))?;
        }
        Ok(())
    }

    /// Overwrites `target` with a comma-separated list when `key` is present.
    pub fn set_list<T: FromStr>(&self, key: &str, target: &mut Vec<T>) -> Result<()> {
        if let Some(v) = self.entries.get(key) {
            *target = parse_list(v).map_err(|_| Error::Config(format!("invalid list {v:?} for {key}")))?;
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Fails on keys outside `known`.
    pub fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        match self.keys().find(|k| !known.contains(k)) {
            Some(k) => Err(Error::Config(format!("unknown key {k}"))),
            None => Ok(()),
        }
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

pub fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, T::Err> {
    v.split(',').map(|s| s.trim().parse()).collect()
}

pub fn join_list<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}
