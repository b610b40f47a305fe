//! Config-file loading, field access with named errors, and the canonical
//! config digest.
//!
//! Configs are TOML with one section per subcommand. The digest is taken
//! over a canonicalized rendering (sorted keys, normalized number
//! formatting), so whitespace, comments and key order never change it.

use anyhow::{anyhow, bail, Context, Result};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;
use toml::{Table, Value};

/// A loaded config file plus its canonical digest.
pub struct RunConfig {
    table: Table,
    pub hash: String,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let table: Table = toml::from_str(text).context("config is not valid TOML")?;
        let mut canon = String::new();
        canonicalize(&Value::Table(table.clone()), &mut canon);
        let digest = Sha256::digest(canon.as_bytes());
        let hash = digest.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        Ok(Self { table, hash })
    }

    /// The named subcommand section.
    pub fn section(&self, name: &str) -> Result<Section<'_>> {
        match self.table.get(name) {
            Some(Value::Table(t)) => Ok(Section { name: name.to_string(), table: t }),
            Some(_) => bail!("config entry [{name}] must be a section"),
            None => bail!("config has no [{name}] section"),
        }
    }
}

fn canonicalize(v: &Value, out: &mut String) {
    match v {
        Value::Table(t) => {
            let mut keys: Vec<&String> = t.keys().collect();
            keys.sort();
            out.push('{');
            for k in keys {
                out.push_str(k);
                out.push('=');
                canonicalize(&t[k], out);
                out.push(';');
            }
            out.push('}');
        }
        Value::Array(a) => {
            out.push('[');
            for x in a {
                canonicalize(x, out);
                out.push(',');
            }
            out.push(']');
        }
        Value::String(s) => {
            let _ = write!(out, "{s:?}");
        }
        Value::Integer(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Float(f) => {
            let _ = write!(out, "{f}");
        }
        Value::Boolean(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Datetime(d) => {
            let _ = write!(out, "{d}");
        }
    }
}

/// One subcommand section with typed, field-naming accessors.
pub struct Section<'a> {
    name: String,
    table: &'a Table,
}

impl<'a> Section<'a> {
    fn missing(&self, key: &str) -> anyhow::Error {
        anyhow!("[{}] is missing required field `{}`", self.name, key)
    }

    pub fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.opt_f64(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => bail!("[{}] field `{}` must be a number", self.name, key),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(_) => bail!("[{}] field `{}` must be a non-negative integer", self.name, key),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.opt_usize(key)?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.table.get(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(_) => bail!("[{}] field `{}` must be a non-negative integer", self.name, key),
        }
    }

    pub fn str_or(&self, key: &str, default: &str) -> Result<String> {
        match self.table.get(key) {
            None => Ok(default.to_string()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => bail!("[{}] field `{}` must be a string", self.name, key),
        }
    }

    pub fn opt_str(&self, key: &str) -> Result<Option<String>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => bail!("[{}] field `{}` must be a string", self.name, key),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.table.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => bail!("[{}] field `{}` must be a boolean", self.name, key),
        }
    }

    pub fn f64_array(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Float(f) => Ok(*f),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => bail!("[{}] field `{}` must be an array of numbers", self.name, key),
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
            Some(_) => bail!("[{}] field `{}` must be an array of numbers", self.name, key),
        }
    }

    pub fn usize_array(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Integer(i) if *i >= 0 => Ok(*i as usize),
                    _ => bail!(
                        "[{}] field `{}` must be an array of non-negative integers",
                        self.name,
                        key
                    ),
                })
                .collect::<Result<Vec<usize>>>()
                .map(Some),
            Some(_) => bail!("[{}] field `{}` must be an array of integers", self.name, key),
        }
    }

    /// Rejects keys outside `allowed`, so typos fail fast.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.table.keys() {
            if !allowed.contains(&k.as_str()) {
                bail!("[{}] has unknown field `{}`", self.name, k);
            }
        }
        Ok(())
    }
}

/// A search grid given as `[lo, hi, count]`.
pub fn grid_spec(section: &Section<'_>, key: &str, default: (f64, f64, usize)) -> Result<fsde_core::mle::GridSpec> {
    match section.f64_array(key)? {
        None => Ok(fsde_core::mle::GridSpec::new(default.0, default.1, default.2)?),
        Some(a) if a.len() == 3 => {
            let count = a[2];
            if count < 1.0 || count.fract() != 0.0 {
                bail!("grid `{key}` count must be a positive integer");
            }
            Ok(fsde_core::mle::GridSpec::new(a[0], a[1], count as usize)?)
        }
        Some(_) => bail!("grid `{key}` must be `[lo, hi, count]`"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_whitespace_comments_and_order() {
        let a = RunConfig::from_text("[s]\nx = 1.5\ny = 2\n").unwrap();
        let b = RunConfig::from_text("# c\n[s]\n  y   =  2\n\nx =   1.5  # t\n").unwrap();
        assert_eq!(a.hash, b.hash);
        let c = RunConfig::from_text("[s]\nx = 1.25\ny = 2\n").unwrap();
        assert_ne!(a.hash, c.hash);
    }

    #[test]
    fn section_accessors_name_fields() {
        let cfg = RunConfig::from_text("[sim]\nn = 10\nbad = \"x\"\n").unwrap();
        let s = cfg.section("sim").unwrap();
        assert_eq!(s.usize_or("n", 0).unwrap(), 10);
        let err = s.f64("beta0").unwrap_err().to_string();
        assert!(err.contains("beta0") && err.contains("[sim]"), "{err}");
        let err = s.f64("bad").unwrap_err().to_string();
        assert!(err.contains("must be a number"), "{err}");
        assert!(cfg.section("nope").is_err());
        assert!(s.check_keys(&["n"]).is_err());
        assert!(s.check_keys(&["n", "bad"]).is_ok());
    }
}
