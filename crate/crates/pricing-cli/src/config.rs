//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a full-line comment, blank lines
//! are skipped. Dotted keys (`scenario.family`, `eval.protocol`) group
//! related settings without any nesting syntax. Duplicate keys and
//! empty values are rejected rather than silently resolved.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{line}`", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                bail!("line {}: empty key", lineno + 1);
            }
            if value.is_empty() {
                bail!("line {}: empty value for `{key}`", lineno + 1);
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                bail!("line {}: duplicate key `{key}`", lineno + 1);
            }
        }
        Ok(Config { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| anyhow!("config is missing required key `{key}`"))
    }

    /// Typed lookup; absent keys fall back to `default`.
    pub fn parse_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Debug,
    {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => {
                raw.parse().map_err(|e| anyhow!("config key `{key}` = `{raw}`: {e:?}"))
            }
        }
    }

    pub fn require_parse<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Debug,
    {
        let raw = self.require(key)?;
        raw.parse().map_err(|e| anyhow!("config key `{key}` = `{raw}`: {e:?}"))
    }

    /// Comma- or whitespace-separated list value.
    pub fn list(&self, key: &str) -> Result<Vec<String>> {
        let raw = self.require(key)?;
        let items: Vec<String> = raw
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        if items.is_empty() {
            bail!("config key `{key}` lists no items");
        }
        Ok(items)
    }

    /// Rejects keys outside `known`, so typos fail loudly instead of
    /// silently falling back to defaults.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        let unknown: Vec<&str> = self
            .entries
            .keys()
            .map(String::as_str)
            .filter(|k| !known.contains(k))
            .collect();
        if !unknown.is_empty() {
            bail!("unknown config keys: {}", unknown.join(", "));
        }
        Ok(())
    }
}

// ── Tests ────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blanks_and_dotted_keys() {
        let cfg = Config::parse(
            "# experiment\n\nscenario.family = uniform_band\nreplications=20\n  n_grid = 300, 30000  \n",
        )
        .unwrap();
        assert_eq!(cfg.get("scenario.family"), Some("uniform_band"));
        assert_eq!(cfg.require_parse::<u32>("replications").unwrap(), 20);
        assert_eq!(cfg.list("n_grid").unwrap(), vec!["300", "30000"]);
    }

    #[test]
    fn value_may_contain_equals() {
        let cfg = Config::parse("note = a=b").unwrap();
        assert_eq!(cfg.get("note"), Some("a=b"));
    }

    #[test]
    fn rejects_duplicates_empties_and_bare_lines() {
        assert!(Config::parse("a = 1\na = 2").unwrap_err().to_string().contains("duplicate"));
        assert!(Config::parse("a =").unwrap_err().to_string().contains("empty value"));
        assert!(Config::parse("= 3").unwrap_err().to_string().contains("empty key"));
        assert!(Config::parse("just words").unwrap_err().to_string().contains("key = value"));
    }

    #[test]
    fn typed_lookups_report_key_and_value() {
        let cfg = Config::parse("reps = many").unwrap();
        assert!(cfg.parse_or::<u32>("reps", 1).unwrap_err().to_string().contains("reps"));
        assert_eq!(cfg.parse_or::<u32>("absent", 7).unwrap(), 7);
        assert!(cfg.require("absent").unwrap_err().to_string().contains("absent"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let cfg = Config::parse("a = 1\nb = 2").unwrap();
        assert!(cfg.check_known(&["a", "b"]).is_ok());
        let err = cfg.check_known(&["a"]).unwrap_err().to_string();
        assert!(err.contains('b') && !err.contains('a'), "{err}");
    }
}
