use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::rules::AlertRuleSet;
use crate::paths;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Alert service settings, read from a TOML key-value file. Every key is
/// optional.
///
/// ```toml
/// store_url = "http://127.0.0.1:8080"
/// devices = ["BAG1"]
/// model_path = "model.bagm"
/// poll_interval_ms = 1000
/// notification_log = "notifications.log"
/// cursor_path = "alerts.cursor"
/// webhook_url = "http://127.0.0.1:9000/hook"
/// alarm_ttl_ms = 60000
///
/// [rules]
/// mq2_max = 300.0
/// mq135_max = 200.0
/// alert_classes = ["Falling"]
/// dedup_window_ms = 30000
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlertConfig {
    pub store_url: String,
    pub token: Option<String>,
    pub devices: Vec<String>,
    pub model_path: PathBuf,
    pub poll_interval_ms: u64,
    /// Most history entries fetched per device per poll.
    pub batch_limit: usize,
    pub notification_log: PathBuf,
    pub cursor_path: Option<PathBuf>,
    pub webhook_url: Option<String>,
    pub alarm_ttl_ms: u64,
    pub rules: AlertRuleSet,
}

impl Default for AlertConfig {
    fn default() -> Self {
        Self {
            store_url: "http://127.0.0.1:8080".into(),
            token: None,
            devices: vec!["BAG1".into()],
            model_path: "model.bagm".into(),
            poll_interval_ms: 1000,
            batch_limit: 100,
            notification_log: "notifications.log".into(),
            cursor_path: None,
            webhook_url: None,
            alarm_ttl_ms: 60_000,
            rules: AlertRuleSet::default(),
        }
    }
}

impl AlertConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.poll_interval_ms == 0 {
            return Err(ConfigError::Invalid("poll_interval_ms must be > 0".into()));
        }
        if self.batch_limit == 0 {
            return Err(ConfigError::Invalid("batch_limit must be > 0".into()));
        }
        if self.devices.is_empty() {
            return Err(ConfigError::Invalid("no devices configured".into()));
        }
        if let Some(bad) = self.devices.iter().find(|d| !paths::valid_device_id(d)) {
            return Err(ConfigError::Invalid(format!("invalid device id {bad:?}")));
        }
        self.rules.validate().map_err(|e| ConfigError::Invalid(e.0))
    }
}
