//! Flat `key=value` configuration files with `#` comments.
//!
//! CLI flags override file keys; unknown keys are hard errors so a typo
//! cannot silently poison an experiment.

use crate::{Error, Result};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::BadConfigValue {
                    key: format!("line {}", lineno + 1),
                    reason: format!("expected key=value, got '{line}'"),
                });
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config { entries })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    /// Apply `key=value` overrides (CLI flags beat file keys).
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let Some((key, value)) = o.split_once('=') else {
                return Err(Error::BadConfigValue {
                    key: o.clone(),
                    reason: "override must be key=value".into(),
                });
            };
            self.entries
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(())
    }

    /// Reject keys outside `accepted`, naming the offender and the options.
    pub fn require_known_keys(&self, accepted: &[&str]) -> Result<()> {
        for key in self.entries.keys() {
            if !accepted.contains(&key.as_str()) {
                return Err(Error::UnknownConfigKey {
                    key: key.clone(),
                    accepted: accepted.join(", "),
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    fn parse_with<T, F: Fn(&str) -> Option<T>>(&self, key: &str, f: F, what: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => f(raw).map(Some).ok_or_else(|| Error::BadConfigValue {
                key: key.to_string(),
                reason: format!("'{raw}' is not a valid {what}"),
            }),
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.parse_with(key, |s| s.parse().ok(), "integer")
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.parse_with(key, |s| s.parse().ok(), "integer")
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.parse_with(key, |s| s.parse().ok(), "number")
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        self.parse_with(
            key,
            |s| match s {
                "true" | "1" | "yes" => Some(true),
                "false" | "0" | "no" => Some(false),
                _ => None,
            },
            "boolean",
        )
    }

    /// `AxBxC` voxel dims.
    pub fn get_dims(&self, key: &str) -> Result<Option<(usize, usize, usize)>> {
        self.parse_with(
            key,
            |s| {
                let parts: Vec<usize> = s.split('x').filter_map(|p| p.parse().ok()).collect();
                (parts.len() == 3 && parts.iter().all(|&p| p > 0))
                    .then(|| (parts[0], parts[1], parts[2]))
            },
            "AxBxC dims triple",
        )
    }

    /// Comma-separated floats.
    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.parse_with(
            key,
            |s| {
                let parts: Vec<f64> = s.split(',').filter_map(|p| p.trim().parse().ok()).collect();
                (!parts.is_empty() && parts.len() == s.split(',').count()).then_some(parts)
            },
            "comma-separated number list",
        )
    }

    /// Comma-separated integers.
    pub fn get_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.parse_with(
            key,
            |s| {
                let parts: Vec<usize> =
                    s.split(',').filter_map(|p| p.trim().parse().ok()).collect();
                (!parts.is_empty() && parts.len() == s.split(',').count()).then_some(parts)
            },
            "comma-separated integer list",
        )
    }

    /// Canonical text: sorted `key=value` lines.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// Stable short hash of the canonical text.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical_text().as_bytes());
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut c = Config::parse("a=1 # trailing\n# full comment\n b = x y \n").unwrap();
        assert_eq!(c.get("a"), Some("1"));
        assert_eq!(c.get("b"), Some("x y"));
        c.apply_overrides(&["a=2".into()]).unwrap();
        assert_eq!(c.get_u64("a").unwrap(), Some(2));
    }

    #[test]
    fn unknown_key_is_a_hard_error_naming_options() {
        let c = Config::parse("sneed=1\n").unwrap();
        let err = c.require_known_keys(&["seed", "out_dir"]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sneed") && msg.contains("seed"), "{msg}");
    }

    #[test]
    fn typed_accessors_validate() {
        let c = Config::parse("dims=8x8x4\nlist=0.1,0.2\nbad=zz\n").unwrap();
        assert_eq!(c.get_dims("dims").unwrap(), Some((8, 8, 4)));
        assert_eq!(c.get_f64_list("list").unwrap(), Some(vec![0.1, 0.2]));
        assert!(c.get_u64("bad").is_err());
        assert_eq!(c.get_u64("absent").unwrap(), None);
    }

    #[test]
    fn hash_is_stable_and_order_independent() {
        let a = Config::parse("x=1\ny=2\n").unwrap();
        let b = Config::parse("y=2\nx=1\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = Config::parse("x=1\ny=3\n").unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
