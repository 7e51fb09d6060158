//! Flag and config-file handling. Every value is kept as text until a
//! command asks for it, so flags and `key = value` lines go through the same
//! parser, and the effective values can be echoed to `run_config.txt`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

pub const KEYS: &[&str] = &[
    "level",
    "N",
    "T",
    "alpha",
    "lo",
    "hi",
    "tol",
    "out",
    "example",
    "levels",
    "q",
    "flow",
    "flow-exponent",
    "init",
    "init-file",
    "f",
    "method",
    "theta",
    "max-iter",
    "t",
];

/// Raw settings of one run: file values overridden by flags.
#[derive(Debug, Default)]
pub struct RunConfig {
    command: String,
    raw: BTreeMap<String, String>,
    effective: Vec<(String, String)>,
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(CliError::Usage(format!("config line {}: unknown key `{key}`", i + 1)));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

impl RunConfig {
    /// Merges `flags` over the optional config file and rejects keys that
    /// `command` does not use.
    pub fn new(
        command: &str,
        file: Option<&Path>,
        flags: BTreeMap<String, String>,
        allowed: &[&str],
    ) -> Result<Self, CliError> {
        let mut raw = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        raw.extend(flags);
        for key in raw.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("`{key}` is not used by `{command}`")));
            }
        }
        Ok(RunConfig {
            command: command.to_string(),
            raw,
            effective: Vec::new(),
        })
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.raw.contains_key(key)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.raw
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Usage(format!("invalid value `{v}` for {key}: {e}")))
            })
            .transpose()
    }

    fn note(&mut self, key: &str, value: String) {
        self.effective.retain(|(k, _)| k != key);
        self.effective.push((key.to_string(), value));
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let v = self.parse(key)?.unwrap_or(default);
        self.note(key, v.to_string());
        Ok(v)
    }

    pub fn optional<T: FromStr + Display>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        let v = self.parse::<T>(key)?;
        if let Some(v) = &v {
            self.note(key, v.to_string());
        }
        Ok(v)
    }

    pub fn required<T: FromStr + Display>(&mut self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.optional(key)?
            .ok_or_else(|| CliError::Missing(format!("`{}` needs --{key}", self.command)))
    }

    /// Text for `run_config.txt`; feeding it back through `--config`
    /// reproduces the run.
    pub fn echo(&self) -> String {
        let mut s = format!("# esfem {}\n", self.command);
        for (k, v) in &self.effective {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

/// Inclusive level range `A..B`, or a single level `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelRange {
    pub first: usize,
    pub last: usize,
}

impl LevelRange {
    pub fn levels(&self) -> Vec<usize> {
        (self.first..=self.last).collect()
    }
}

impl FromStr for LevelRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once("..").unwrap_or((s, s));
        let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
        let (first, last) = (parse(a)?, parse(b.trim_start_matches('='))?);
        if first > last {
            return Err(format!("empty level range {first}..{last}"));
        }
        Ok(LevelRange { first, last })
    }
}

impl Display for LevelRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn config_text_parses() {
        let m = parse_config_text("# comment\nlevel = 3\n\nalpha=0.5\n").unwrap();
        assert_eq!(m["level"], "3");
        assert_eq!(m["alpha"], "0.5");
        assert!(parse_config_text("nonsense = 1").is_err());
        assert!(parse_config_text("level 3").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, "level = 2\nalpha = 0.5\n").unwrap();
        let mut c = RunConfig::new("solve pd", Some(&path), flags(&[("level", "4")]), &["level", "alpha"]).unwrap();
        assert_eq!(c.get("level", 0usize).unwrap(), 4);
        assert_eq!(c.get("alpha", 1.0).unwrap(), 0.5);
    }

    #[test]
    fn unused_keys_rejected() {
        let err = RunConfig::new("mesh-info", None, flags(&[("alpha", "1")]), &["level"]).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
    }

    #[test]
    fn echo_round_trips() {
        let mut c = RunConfig::new("solve pd", None, flags(&[("alpha", "0.1")]), &["alpha", "tol"]).unwrap();
        c.get("alpha", 1.0).unwrap();
        c.get("tol", 1e-9).unwrap();
        let text = c.echo();
        let back = parse_config_text(&text).unwrap();
        assert_eq!(back["alpha"].parse::<f64>().unwrap(), 0.1);
        assert_eq!(back["tol"].parse::<f64>().unwrap(), 1e-9);
    }

    #[test]
    fn level_ranges() {
        assert_eq!("0..8".parse::<LevelRange>().unwrap().levels().len(), 9);
        assert_eq!("3".parse::<LevelRange>().unwrap().levels(), vec![3]);
        assert!("5..2".parse::<LevelRange>().is_err());
        assert!("a..2".parse::<LevelRange>().is_err());
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let mut c = RunConfig::new("x", None, flags(&[("level", "three")]), &["level"]).unwrap();
        assert!(matches!(c.get("level", 0usize), Err(CliError::Usage(_))));
        let mut c = RunConfig::new("x", None, BTreeMap::new(), &["level"]).unwrap();
        assert!(matches!(c.required::<usize>("level"), Err(CliError::Missing(_))));
    }
}
