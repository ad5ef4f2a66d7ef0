// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use aiid_core::registry::RegistryConfig;
use aiid_core::PublicKey;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BIND: &str = "127.0.0.1:8700";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("environment variable {name}: {reason}")]
    Env { name: &'static str, reason: String },
}

/// Service configuration.
///
/// ```toml
/// bind = "127.0.0.1:8700"
/// ledger_path = "/var/lib/aiid/registry.ledger"
/// authorities = ["<64 hex chars>"]
/// challenge_ttl_secs = 300
/// min_rounds = 69
///
/// [drift_policies]
/// default = 0.5
/// high = 0.2
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub bind: String,
    /// In-memory ledger when absent.
    pub ledger_path: Option<PathBuf>,
    #[serde(flatten)]
    pub registry: RegistryConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: DEFAULT_BIND.to_owned(),
            ledger_path: None,
            registry: RegistryConfig::default(),
        }
    }
}

impl ServerConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Applies `AIID_BIND`, `AIID_LEDGER`, `AIID_AUTHORITIES` (comma
    /// separated hex keys) and `AIID_CHALLENGE_TTL`.
    pub fn apply_env(mut self, get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        if let Some(v) = get("AIID_BIND") {
            self.bind = v;
        }
        if let Some(v) = get("AIID_LEDGER") {
            self.ledger_path = Some(PathBuf::from(v));
        }
        if let Some(v) = get("AIID_AUTHORITIES") {
            self.registry.authorities = v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<PublicKey>())
                .collect::<Result<_, _>>()
                .map_err(|e| ConfigError::Env {
                    name: "AIID_AUTHORITIES",
                    reason: e.to_string(),
                })?;
        }
        if let Some(v) = get("AIID_CHALLENGE_TTL") {
            self.registry.challenge_ttl_secs = v.parse().map_err(|e: std::num::ParseIntError| ConfigError::Env {
                name: "AIID_CHALLENGE_TTL",
                reason: e.to_string(),
            })?;
        }
        Ok(self)
    }
}
