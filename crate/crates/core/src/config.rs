//! Flat `key = value` run configuration.
//!
//! Each command declares its keys and defaults. Values are layered: defaults,
//! then the config file, then command-line overrides. Unknown keys are an
//! error at every layer.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// One declared key. An empty default means the key has no value unless
/// one is supplied.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

pub const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are
/// skipped. `origin` names the source in error messages.
pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(origin, i + 1, format!("expected key = value, got {line:?}")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::parse(origin, i + 1, "empty key"));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Parses a single `key=value` override as given on the command line.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::InvalidConfig(format!("expected key=value, got {s:?}"))),
    }
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub command: String,
    values: BTreeMap<String, String>,
    /// Keys in declaration order, for stable output.
    order: Vec<&'static str>,
    /// Directory of the config file, used to resolve relative paths in it.
    base: Option<PathBuf>,
    from_file: Vec<String>,
}

impl RunConfig {
    /// Resolves `keys` against an optional config file and overrides.
    pub fn resolve(
        command: &str,
        keys: &[Key],
        file: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let mut values: BTreeMap<String, String> =
            keys.iter().map(|k| (k.name.to_string(), k.default.to_string())).collect();
        let known = |k: &str, origin: &str| -> Result<()> {
            if values_contains(keys, k) {
                Ok(())
            } else {
                let valid: Vec<&str> = keys.iter().map(|k| k.name).collect();
                Err(Error::InvalidConfig(format!(
                    "unknown key {k:?} in {origin} for `{command}` (valid keys: {})",
                    valid.join(", ")
                )))
            }
        };
        let mut base = None;
        let mut from_file = Vec::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let shown = path.display().to_string();
            for (k, v) in parse_pairs(&text, &shown)? {
                known(&k, &shown)?;
                from_file.push(k.clone());
                values.insert(k, v);
            }
            base = path.parent().map(Path::to_path_buf);
        }
        for (k, v) in overrides {
            known(k, "command-line overrides")?;
            from_file.retain(|f| f != k);
            values.insert(k.clone(), v.clone());
        }
        Ok(RunConfig { command: command.to_string(), values, order: keys.iter().map(|k| k.name).collect(), base, from_file })
    }

    /// The raw value, or `None` when unset or empty.
    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let v = self.raw(key).ok_or_else(|| Error::InvalidConfig(format!("missing required key {key:?}")))?;
        v.parse().map_err(|e| Error::InvalidConfig(format!("key {key:?}: cannot parse {v:?}: {e}")))
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(_) => self.get(key).map(Some),
        }
    }

    /// A path value. Paths given in the config file are relative to the
    /// file's directory; overrides are relative to the working directory.
    pub fn path(&self, key: &str) -> Result<PathBuf> {
        self.path_opt(key)?.ok_or_else(|| Error::InvalidConfig(format!("missing required key {key:?}")))
    }

    pub fn path_opt(&self, key: &str) -> Result<Option<PathBuf>> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let p = PathBuf::from(v);
        Ok(Some(match &self.base {
            Some(base) if p.is_relative() && self.from_file.iter().any(|k| k == key) => base.join(p),
            _ => p,
        }))
    }

    /// `key = value` lines in declaration order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for k in &self.order {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&self.values[*k]);
            out.push('\n');
        }
        out
    }
}

fn values_contains(keys: &[Key], k: &str) -> bool {
    keys.iter().any(|key| key.name == k)
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEYS: &[Key] = &[key("corpus", "", "corpus file"), key("steps", "10", "steps"), key("lr", "5e-5", "lr")];

    #[test]
    fn layering_and_render() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("run.conf");
        std::fs::write(&f, "# comment\ncorpus = data/c.txt\nsteps = 20 # trailing\n\n").unwrap();
        let c = RunConfig::resolve("train", KEYS, Some(&f), &[("lr".into(), "1e-3".into())]).unwrap();
        assert_eq!(c.get::<u64>("steps").unwrap(), 20);
        assert_eq!(c.get::<f64>("lr").unwrap(), 1e-3);
        assert_eq!(c.path("corpus").unwrap(), dir.path().join("data/c.txt"));
        assert_eq!(c.render(), "corpus = data/c.txt\nsteps = 20\nlr = 1e-3\n");

        let c = RunConfig::resolve("train", KEYS, Some(&f), &[("steps".into(), "3".into())]).unwrap();
        assert_eq!(c.get::<u64>("steps").unwrap(), 3);
    }

    #[test]
    fn unknown_and_malformed() {
        let err = RunConfig::resolve("train", KEYS, None, &[("stepz".into(), "1".into())]).unwrap_err().to_string();
        assert!(err.contains("\"stepz\"") && err.contains("steps"), "{err}");

        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("bad.conf");
        std::fs::write(&f, "steps = 1\nnonsense\n").unwrap();
        let err = RunConfig::resolve("train", KEYS, Some(&f), &[]).unwrap_err().to_string();
        assert!(err.contains("bad.conf:2:"), "{err}");

        let c = RunConfig::resolve("train", KEYS, None, &[("steps".into(), "x".into())]).unwrap();
        let err = c.get::<u64>("steps").unwrap_err().to_string();
        assert!(err.contains("\"steps\""), "{err}");
        let err = c.path("corpus").unwrap_err().to_string();
        assert!(err.contains("missing required key \"corpus\""), "{err}");
        assert!(parse_override("novalue").is_err());
    }
}
