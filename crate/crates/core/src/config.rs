//! Cluster topology files.
//!
//! ```json
//! {
//!   "producer": {"listen": "127.0.0.1:0"},
//!   "consumers": [
//!     {"id": 1, "address": "127.0.0.1:7001", "responsibilities": ["visual"], "eye": "left"}
//!   ],
//!   "storage_path": "fixtures"
//! }
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::effects::EffectType;
use crate::mapping::ResponsibilitySet;
use crate::runtime::eye::{Eye, DEFAULT_IPD};

/// Arbitrary sanity bound on the number of consumers.
pub const MAX_CONSUMERS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProducerConfig {
    /// `host:port`; port 0 picks a free port.
    pub listen: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsumerConfig {
    pub id: u8,
    /// Where the consumer runs. Informational for local runs: consumers dial
    /// the producer.
    pub address: String,
    pub responsibilities: ResponsibilitySet,
    #[serde(default)]
    pub eye: Eye,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingConfig {
    pub udp_port: u16,
    #[serde(default = "default_frame_rate")]
    pub frame_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_body: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hand_body: Option<u32>,
}

fn default_frame_rate() -> f64 {
    60.0
}

fn default_ipd() -> f64 {
    DEFAULT_IPD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub producer: ProducerConfig,
    pub consumers: Vec<ConsumerConfig>,
    /// Common storage directory for scenes, mappings and audio files.
    /// Relative paths resolve against the config file's directory.
    pub storage_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracking: Option<TrackingConfig>,
    #[serde(default = "default_ipd")]
    pub ipd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Json(String),
    #[error("duplicate consumer id {0}")]
    DuplicateId(u8),
    #[error("malformed address `{0}`; expected host:port")]
    BadAddress(String),
    #[error("more than one consumer renders the {0} eye")]
    DuplicateEye(&'static str),
    #[error("consumer {0} has no responsibilities")]
    NoResponsibilities(u8),
    #[error("config lists no consumers")]
    NoConsumers,
    #[error("{0} consumers exceed the limit of {MAX_CONSUMERS}")]
    TooManyConsumers(usize),
    #[error("ipd must be a positive number of meters, got {0}")]
    BadIpd(f64),
    #[error("tracking frame rate must be positive, got {0}")]
    BadFrameRate(f64),
}

pub fn parse_config(text: &str) -> Result<ClusterConfig, ConfigError> {
    let config: ClusterConfig =
        serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
    config.check()?;
    Ok(config)
}

impl ClusterConfig {
    pub fn check(&self) -> Result<(), ConfigError> {
        check_address(&self.producer.listen)?;
        if self.consumers.is_empty() {
            return Err(ConfigError::NoConsumers);
        }
        if self.consumers.len() > MAX_CONSUMERS {
            return Err(ConfigError::TooManyConsumers(self.consumers.len()));
        }
        let mut ids = HashSet::new();
        let mut eyes = HashSet::new();
        for c in &self.consumers {
            if !ids.insert(c.id) {
                return Err(ConfigError::DuplicateId(c.id));
            }
            check_address(&c.address)?;
            if c.responsibilities.is_empty() {
                return Err(ConfigError::NoResponsibilities(c.id));
            }
            if c.eye != Eye::Mono && !eyes.insert(c.eye) {
                return Err(ConfigError::DuplicateEye(c.eye.as_str()));
            }
        }
        if !(self.ipd.is_finite() && self.ipd > 0.0) {
            return Err(ConfigError::BadIpd(self.ipd));
        }
        if let Some(t) = &self.tracking {
            if !(t.frame_rate_hz.is_finite() && t.frame_rate_hz > 0.0) {
                return Err(ConfigError::BadFrameRate(t.frame_rate_hz));
            }
        }
        Ok(())
    }

    pub fn responsibilities(&self) -> ResponsibilitySet {
        self.consumers
            .iter()
            .fold(ResponsibilitySet::default(), |acc, c| {
                acc.union(c.responsibilities)
            })
    }

    /// Effect types in `used` that no consumer presents.
    pub fn uncovered(&self, used: ResponsibilitySet) -> Vec<EffectType> {
        let have = self.responsibilities();
        used.types().filter(|t| !have.contains(*t)).collect()
    }

    /// Storage directory resolved against the directory holding the config.
    pub fn storage_dir(&self, config_dir: &Path) -> PathBuf {
        config_dir.join(&self.storage_path)
    }
}

fn check_address(addr: &str) -> Result<(), ConfigError> {
    let bad = || ConfigError::BadAddress(addr.to_string());
    let (host, port) = addr.rsplit_once(':').ok_or_else(bad)?;
    if host.is_empty() || host.contains(char::is_whitespace) || port.parse::<u16>().is_err() {
        return Err(bad());
    }
    Ok(())
}
