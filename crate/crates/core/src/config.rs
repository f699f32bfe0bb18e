//! Flat `key = value` configuration files. Repeated keys form lists; `#`
//! starts a comment line.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, Vec<String>>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid("config", format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::invalid("config", format!("line {}: empty key", lineno + 1)));
            }
            kv.entries
                .entry(key.to_string())
                .or_default()
                .push(value.trim().to_string());
        }
        Ok(kv)
    }

    /// Replaces every value of `key` (used for `--set key=value`).
    pub fn set(&mut self, key: &str, value: &str) {
        self.entries
            .insert(key.trim().to_string(), vec![value.trim().to_string()]);
    }

    /// Replaces every value of `key` with `values`.
    pub fn set_all(&mut self, key: &str, values: &[String]) {
        self.entries.insert(key.trim().to_string(), values.to_vec());
    }

    /// Parses `key=value` and applies it with [`KeyValues::set`].
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::invalid("override", format!("'{assignment}' is not key=value")))?;
        self.set(k, v);
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|k| k.as_str())
    }

    pub fn all(&self, key: &str) -> &[String] {
        self.entries.get(key).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// The single value of `key`; an error if it is repeated.
    pub fn one(&self, key: &str) -> Result<Option<&str>> {
        match self.all(key) {
            [] => Ok(None),
            [v] => Ok(Some(v.as_str())),
            _ => Err(Error::invalid(key, "expected a single value")),
        }
    }

    pub fn required(&self, key: &str) -> Result<&str> {
        self.one(key)?
            .ok_or_else(|| Error::invalid(key, "missing required key"))
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.one(key)? {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::invalid(key, format!("cannot parse '{v}'"))),
        }
    }

    pub fn parsed_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// Every value of `key` parsed, with comma-separated values flattened.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let mut out = Vec::new();
        for v in self.all(key) {
            for part in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                out.push(
                    part.parse()
                        .map_err(|_| Error::invalid(key, format!("cannot parse '{part}'")))?,
                );
            }
        }
        Ok(out)
    }

    /// Every value of `key` as a comma-separated vector of length `d`; one
    /// value may carry several points separated by `;`.
    pub fn points(&self, key: &str, d: usize) -> Result<Vec<Vec<f64>>> {
        self.all(key)
            .iter()
            .flat_map(|v| v.split(';').map(str::trim).filter(|s| !s.is_empty()))
            .map(|v| {
                let p: Vec<f64> = v
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::invalid(key, format!("cannot parse point '{v}'")))?;
                if p.len() != d {
                    return Err(Error::invalid(key, format!("point '{v}' does not have {d} coordinates")));
                }
                Ok(p)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_overrides() {
        let mut kv = KeyValues::parse("# comment\nalpha = 0.25\nalpha=0.5, 0.75\nh = 0.2\nx = 0.1,0.2\n").unwrap();
        assert_eq!(kv.list::<f64>("alpha").unwrap(), vec![0.25, 0.5, 0.75]);
        assert_eq!(kv.parsed::<f64>("h").unwrap(), Some(0.2));
        assert_eq!(kv.points("x", 2).unwrap(), vec![vec![0.1, 0.2]]);
        assert!(kv.points("x", 1).is_err());
        assert!(kv.one("alpha").is_err());
        kv.apply_override("alpha=1.2").unwrap();
        assert_eq!(kv.list::<f64>("alpha").unwrap(), vec![1.2]);
        assert!(kv.required("missing").is_err());
        assert!(KeyValues::parse("novalue\n").is_err());
        let err = kv.parsed::<f64>("x").unwrap_err();
        assert!(err.to_string().contains("x"));
    }
}
