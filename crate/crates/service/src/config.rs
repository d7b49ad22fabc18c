use dcfootprint::attribution::{DEFAULT_INVENTORY_YEAR, DEFAULT_UPTIME};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const ENV_PORT: &str = "DCFOOTPRINT_PORT";
pub const ENV_ARTIFACTS: &str = "DCFOOTPRINT_ARTIFACTS";
pub const ENV_UPTIME: &str = "DCFOOTPRINT_UPTIME";
pub const ENV_CORS_ORIGINS: &str = "DCFOOTPRINT_CORS_ORIGINS";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("service config: {0}")]
    Parse(String),
    #[error("environment variable {name}: {message}")]
    Env { name: &'static str, message: String },
    #[error("service config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    /// Output directory of a pipeline run.
    pub artifacts: PathBuf,
    /// Uptime for scenarios that do not name one.
    pub default_uptime: f64,
    pub year: i32,
    /// Browser origins allowed to call the API. Empty disables CORS headers.
    pub cors_origins: Vec<String>,
    /// When false, scenarios outside every region are refused instead of
    /// taking the nearest region.
    pub allow_fallback: bool,
    /// Plant rows returned per scenario unless the request asks otherwise.
    pub top_n: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1".into(),
            port: 8080,
            artifacts: PathBuf::from("out"),
            default_uptime: DEFAULT_UPTIME,
            year: DEFAULT_INVENTORY_YEAR,
            cors_origins: Vec::new(),
            allow_fallback: true,
            top_n: 5,
        }
    }
}

impl ServiceConfig {
    /// Read an optional TOML file, then apply environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|e| ConfigError::Read { path: p.to_path_buf(), source: e })?;
                Self::from_toml(&text)?
            }
            None => ServiceConfig::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = lookup(ENV_PORT) {
            self.port = v
                .trim()
                .parse()
                .map_err(|_| ConfigError::Env { name: ENV_PORT, message: format!("bad port {v:?}") })?;
        }
        if let Some(v) = lookup(ENV_ARTIFACTS) {
            self.artifacts = PathBuf::from(v);
        }
        if let Some(v) = lookup(ENV_UPTIME) {
            self.default_uptime = v
                .trim()
                .parse()
                .map_err(|_| ConfigError::Env { name: ENV_UPTIME, message: format!("bad uptime {v:?}") })?;
        }
        if let Some(v) = lookup(ENV_CORS_ORIGINS) {
            self.cors_origins = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect();
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.default_uptime > 0.0 && self.default_uptime <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "default_uptime must lie in (0, 1], got {}",
                self.default_uptime
            )));
        }
        Ok(())
    }
}
