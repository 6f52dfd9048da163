//! Key=value configuration for the statistical-baseline parameters and the
//! generator defaults. The committed `config/defaults.conf` mirrors the
//! built-in defaults so benchmark numbers are reproducible.

use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got `{text}`")]
    BadLine { line: usize, text: String },
    #[error("line {line}: bad value for {key}: {message}")]
    BadValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Generator defaults, per household before per-index variation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenDefaults {
    pub base_load_w: f64,
    pub diurnal_amplitude_w: f64,
    pub noise_w: f64,
    pub reactive_fraction: f64,
    /// Share of households that feed energy back to the grid.
    pub generation_share: f64,
}

impl Default for GenDefaults {
    fn default() -> Self {
        Self {
            base_load_w: 220.0,
            diurnal_amplitude_w: 140.0,
            noise_w: 40.0,
            reactive_fraction: 0.10,
            generation_share: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolConfig {
    /// Deflate level of the statistical baseline.
    pub stat_level: u32,
    pub gen: GenDefaults,
}

impl Default for ToolConfig {
    fn default() -> Self {
        Self {
            stat_level: 9,
            gen: GenDefaults::default(),
        }
    }
}

impl ToolConfig {
    pub fn parse(text: &str) -> Result<ToolConfig, ConfigError> {
        let mut cfg = ToolConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::BadLine {
                line,
                text: trimmed.into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |message: String| ConfigError::BadValue {
                line,
                key: key.into(),
                message,
            };
            match key {
                "stat.level" => {
                    cfg.stat_level = value.parse().map_err(|e| bad(format!("{e}")))?;
                    if cfg.stat_level > 9 {
                        return Err(bad("deflate level must be 0..=9".into()));
                    }
                }
                "gen.base_load_w" => cfg.gen.base_load_w = value.parse().map_err(|e| bad(format!("{e}")))?,
                "gen.diurnal_amplitude_w" => {
                    cfg.gen.diurnal_amplitude_w = value.parse().map_err(|e| bad(format!("{e}")))?
                }
                "gen.noise_w" => cfg.gen.noise_w = value.parse().map_err(|e| bad(format!("{e}")))?,
                "gen.reactive_fraction" => {
                    cfg.gen.reactive_fraction = value.parse().map_err(|e| bad(format!("{e}")))?
                }
                "gen.generation_share" => {
                    cfg.gen.generation_share = value.parse().map_err(|e| bad(format!("{e}")))?
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.into(),
                    })
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ToolConfig, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
