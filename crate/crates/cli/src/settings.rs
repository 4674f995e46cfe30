//! Flat `key = value` config files with command-line override, plus the
//! parameter record that every resolved value flows into so the run manifest
//! captures the complete effective configuration.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

/// Parameter types a config key can carry; `render` is the form written to
/// the manifest.
pub trait SettingValue: FromStr {
    fn render(&self) -> String;
}

macro_rules! display_settings {
    ($($t:ty),* $(,)?) => {$(
        impl SettingValue for $t {
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

display_settings!(usize, u32, u64, f64, String, graph_dna::synth::Smoothing);

impl SettingValue for PathBuf {
    fn render(&self) -> String {
        self.display().to_string()
    }
}

pub struct Settings {
    file: HashMap<String, String>,
    resolved: Vec<(String, String)>,
}

impl Settings {
    pub fn load(config: Option<&Path>) -> Result<Self, CliError> {
        let mut file = HashMap::new();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(path.display().to_string(), e))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(CliError::Usage(format!(
                        "{}:{}: config lines must be `key = value`",
                        path.display(),
                        lineno + 1
                    )));
                };
                file.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Settings {
            file,
            resolved: Vec::new(),
        })
    }

    /// CLI flag beats config file beats default.
    pub fn get<T: SettingValue>(
        &mut self,
        cli: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, CliError> {
        let value = match cli {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(raw) => raw.parse().map_err(|_| {
                    CliError::Usage(format!("config key `{key}`: cannot parse `{raw}`"))
                })?,
                None => default,
            },
        };
        self.resolved.push((key.to_string(), value.render()));
        Ok(value)
    }

    /// As [`Settings::get`] but without a default; `None` when absent.
    pub fn get_opt<T: SettingValue>(
        &mut self,
        cli: Option<T>,
        key: &str,
    ) -> Result<Option<T>, CliError> {
        let value = match cli {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) => Some(raw.parse().map_err(|_| {
                    CliError::Usage(format!("config key `{key}`: cannot parse `{raw}`"))
                })?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.push((key.to_string(), v.render()));
        }
        Ok(value)
    }

    /// Required parameter: flag or config key must supply it.
    pub fn get_req<T: SettingValue>(
        &mut self,
        cli: Option<T>,
        key: &str,
    ) -> Result<T, CliError> {
        self.get_opt(cli, key)?
            .ok_or_else(|| CliError::Usage(format!("missing required parameter `{key}`")))
    }

    /// Record a derived value so it lands in the manifest.
    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.resolved.push((key.to_string(), value.to_string()));
    }

    pub fn resolved(&self) -> &[(String, String)] {
        &self.resolved
    }
}

/// Comma-separated list parsing for grid and weight flags.
pub fn parse_list<T: FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .map(|tok| {
            tok.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad {what} entry `{tok}`")))
        })
        .collect()
}
