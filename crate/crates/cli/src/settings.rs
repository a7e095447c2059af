//! Flat `key = value` config files merged under command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use somrst::{Error, Result};

#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl Settings {
    /// Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Usage(format!("config line {}: expected `key = value`", n + 1)));
            };
            values.insert(normalize(k), v.trim().to_string());
        }
        Ok(Settings { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(normalize(key), value.into());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Error::Usage(format!("bad value `{v}` for `{key}`"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.raw(key).ok_or_else(|| Error::Usage(format!("missing --{}", key.replace('_', "-"))))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }

    /// Keys this command never reads, for a warning.
    pub fn unknown<'a>(&'a self, known: &'a [&str]) -> impl Iterator<Item = &'a str> + 'a {
        self.values.keys().map(String::as_str).filter(move |k| !known.contains(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let mut s = Settings::parse("# defaults\nmin-strength = 0.5\nel=0.9 # strict\n\n").unwrap();
        assert_eq!(s.get::<f64>("min_strength").unwrap(), Some(0.5));
        s.set("el", "0.7");
        assert_eq!(s.get_or("el", 0.0).unwrap(), 0.7);
        assert_eq!(s.get_or("k", 2usize).unwrap(), 2);
        assert!(s.get::<usize>("el").is_err());
        assert!(Settings::parse("just words").is_err());
    }
}
