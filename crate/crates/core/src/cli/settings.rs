use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::CliError;
use crate::io_util::{parse_key_values, read_text};

/// Values from an optional `key=value` config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
    source: Option<PathBuf>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = read_text(path)?;
        Settings::parse(&text, Some(path.to_path_buf()))
    }

    pub fn parse(text: &str, source: Option<PathBuf>) -> Result<Self, CliError> {
        let raw =
            parse_key_values(text).map_err(|e| CliError::validation(format!("config: {e}")))?;
        Ok(Settings {
            values: raw.into_iter().map(|(k, v)| (normalize(&k), v)).collect(),
            source,
        })
    }

    fn from_file<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let key = normalize(key);
        match self.values.get(&key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| {
                let src = self
                    .source
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| "config".into());
                CliError::validation(format!("{src}: bad value {v:?} for {key}: {e}"))
            }),
        }
    }

    /// Flag, else config key, else `None`.
    pub fn optional<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.from_file(key),
        }
    }

    pub fn value<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.optional(key, flag)?.unwrap_or(default))
    }

    pub fn required<T>(&self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.optional(key, flag)?.ok_or_else(|| {
            CliError::validation(format!("missing required --{}", key.replace('_', "-")))
        })
    }

    /// Boolean switch: a given flag wins, then the config key.
    pub fn switch(&self, key: &str, flag: bool, default: bool) -> Result<bool, CliError> {
        if flag {
            return Ok(true);
        }
        Ok(self.from_file(key)?.unwrap_or(default))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flag_then_file_then_default() {
        let s = Settings::parse("frames = 40\n# comment\namp-min=0.25\n", None).unwrap();
        assert_eq!(s.value("frames", Some(7usize), 100).unwrap(), 7);
        assert_eq!(s.value("frames", None, 100usize).unwrap(), 40);
        assert_eq!(s.value("width", None, 128usize).unwrap(), 128);
        assert_eq!(s.value("amp_min", None, 1.0f64).unwrap(), 0.25);
        assert_eq!(s.value::<f64>("amp-min", None, 1.0).unwrap(), 0.25);
    }

    #[test]
    fn bad_values_are_validation_errors() {
        let s = Settings::parse("frames=forty\nforce=yes\n", None).unwrap();
        assert_eq!(
            s.value("frames", None, 1usize).unwrap_err().code,
            super::super::EXIT_VALIDATION
        );
        assert!(s.switch("force", false, false).is_err());
        assert!(s.switch("force", true, false).unwrap());
        assert_eq!(
            s.required::<PathBuf>("out", None).unwrap_err().message,
            "missing required --out"
        );
        assert!(Settings::parse("just words\n", None).is_err());
    }
}
