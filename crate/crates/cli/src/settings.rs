use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

/// Keys accepted in a config file. They match the long flag names.
pub const KNOWN_KEYS: &[&str] = &[
    "aggregation",
    "allow-missing",
    "anomalies-per-image",
    "aspect",
    "backoff-ms",
    "bins",
    "boxes",
    "concepts",
    "count",
    "cutouts",
    "diff-threshold",
    "dilation",
    "endpoint",
    "ground-contact",
    "group-by",
    "h-max",
    "h-min",
    "harmonize",
    "height",
    "images",
    "jobs",
    "keep-largest",
    "kernel",
    "leak-tolerance",
    "limit",
    "manifest",
    "maps",
    "max-fraction",
    "max-in-flight",
    "median-radius",
    "method",
    "min-fraction",
    "n",
    "out",
    "quotas",
    "range",
    "refine",
    "require-refined",
    "retries",
    "s-h",
    "schema",
    "scores",
    "seed",
    "split",
    "timeout-secs",
    "total",
    "width",
];

/// Values from a flat `key = value` file, consulted when a flag is absent.
#[derive(Debug, Default)]
pub struct Settings {
    source: Option<PathBuf>,
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str, source: Option<PathBuf>) -> Result<Self, CliError> {
        let name = source.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "config".into());
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("{name}:{}: expected key = value", i + 1)))?;
            let k = k.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&k.as_str()) {
                return Err(CliError::config(format!("{name}:{}: unknown key `{k}`", i + 1)));
            }
            if values.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(CliError::config(format!("{name}:{}: `{k}` set twice", i + 1)));
            }
        }
        Ok(Self { source, values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
                Self::parse(&text, Some(p.to_path_buf()))
            }
        }
    }

    /// The flag when given, else the config value, else `None`.
    pub fn opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| {
                let src = self.source.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
                CliError::config(format!("{src}: `{key} = {v}`: {e}"))
            }),
        }
    }

    pub fn get<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.opt(flag, key)?.ok_or_else(|| CliError::config(format!("--{key} is required")))
    }

    /// A required input path that must already exist.
    pub fn input(&self, flag: Option<PathBuf>, key: &str) -> Result<PathBuf, CliError> {
        let p = self.require(flag, key)?;
        existing(p, key)
    }

    pub fn input_opt(&self, flag: Option<PathBuf>, key: &str) -> Result<Option<PathBuf>, CliError> {
        self.opt(flag, key)?.map(|p| existing(p, key)).transpose()
    }
}

fn existing(p: PathBuf, key: &str) -> Result<PathBuf, CliError> {
    if !p.exists() {
        return Err(CliError::config(format!("--{key} {}: no such file or directory", p.display())));
    }
    Ok(p)
}

/// `min:max`, or a single value meaning `value:value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span<T>(pub T, pub T);

impl<T: FromStr + Copy> FromStr for Span<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let one = |v: &str| v.trim().parse::<T>().map_err(|e| format!("`{v}`: {e}"));
        match s.split_once(':') {
            Some((a, b)) => Ok(Span(one(a)?, one(b)?)),
            None => {
                let v = one(s)?;
                Ok(Span(v, v))
            }
        }
    }
}

/// Comma-separated list.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| v.parse::<T>().map_err(|e| format!("`{v}`: {e}")))
            .collect::<Result<_, _>>()
            .map(List)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beats_default() {
        let s = Settings::parse("# c\nseed = 9\nn_=1\n", None);
        assert!(s.is_err());
        let s = Settings::parse("seed = 9\ns_h = 30\n", None).unwrap();
        assert_eq!(s.get(Some(3u64), "seed", 0).unwrap(), 3);
        assert_eq!(s.get(None::<u64>, "seed", 0).unwrap(), 9);
        assert_eq!(s.get(None::<f64>, "s-h", 24.0).unwrap(), 30.0);
        assert_eq!(s.get(None::<usize>, "n", 64).unwrap(), 64);
    }

    #[test]
    fn bad_lines_are_config_errors() {
        for text in ["seed 9", "colour = red", "seed = 1\nseed = 2"] {
            assert_eq!(Settings::parse(text, None).unwrap_err().code, 2, "{text}");
        }
        let s = Settings::parse("seed = x", None).unwrap();
        assert_eq!(s.get(None::<u64>, "seed", 0).unwrap_err().code, 2);
    }

    #[test]
    fn spans_and_lists() {
        assert_eq!("2:1".parse::<Span<f64>>().unwrap(), Span(2.0, 1.0));
        assert_eq!("2".parse::<Span<usize>>().unwrap(), Span(2, 2));
        assert!("a:1".parse::<Span<f64>>().is_err());
        assert_eq!("a, b,".parse::<List<String>>().unwrap().0, vec!["a", "b"]);
    }
}
