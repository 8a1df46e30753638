//! `key = value` configuration files.

use std::path::Path;

use anyhow::{bail, Context, Result};

/// Entries in file order, with their 1-based line numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub entries: Vec<(String, String, usize)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`, got `{}`", i + 1, raw.trim());
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                bail!("line {}: empty key or value", i + 1);
            }
            if let Some((_, _, first)) = entries.iter().find(|(k, _, _)| k == key) {
                bail!("line {}: `{key}` already set on line {first}", i + 1);
            }
            entries.push((key.to_string(), value.to_string(), i + 1));
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    #[cfg(test)]
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _, _)| k == key).map(|(_, v, _)| v.as_str())
    }
}

/// Renders entries as a config file that [`ConfigFile::parse`] reads back.
pub fn render(header: &[String], entries: &[(&str, String)]) -> String {
    let mut out = String::new();
    for line in header {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    for (k, v) in entries {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let f = ConfigFile::parse("# header\n\nreceiver.c_pd = 2e-13  # fF\n  qpsk.noise_enabled=false\n").unwrap();
        assert_eq!(f.get("receiver.c_pd"), Some("2e-13"));
        assert_eq!(f.get("qpsk.noise_enabled"), Some("false"));
        assert_eq!(f.entries[0].2, 3);
    }

    #[test]
    fn rejects_malformed_lines() {
        let err = ConfigFile::parse("a = 1\nnonsense\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        assert!(ConfigFile::parse("a = 1\na = 2\n").is_err());
        assert!(ConfigFile::parse("a = \n").is_err());
    }

    #[test]
    fn render_round_trips() {
        let entries = vec![("x.a", "1.5".to_string()), ("x.b", "-inf".to_string())];
        let text = render(&["fitted".into()], &entries);
        let f = ConfigFile::parse(&text).unwrap();
        assert_eq!(f.get("x.b"), Some("-inf"));
        assert_eq!(f.entries.len(), 2);
    }
}
