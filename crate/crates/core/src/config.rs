//! TOML configuration for end-to-end pipeline runs and the storage service.
//!
//! A pipeline config names the labeled training archive, where the day under
//! analysis comes from (a trace archive, a measurement-service URL, or both),
//! and the knobs of every stage. Every field beyond the identity block is
//! optional and falls back to module defaults, so a minimal config is:
//!
//! ```toml
//! user = "Alice"
//! home = "home-1"
//! day = "2024-06-04"
//! train_archive = "train.traces"
//! test_archive = "test.traces"
//! ```

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;
use thiserror::Error;

use crate::disagg::TrainConfig;
use crate::events::DebounceParams;
use crate::report::ReportTemplate;
use crate::storage::{self, StorageConfig};
use crate::trace::{LabelConfig, LabelParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config file {path} is not valid TOML: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Everything a full pipeline run needs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Person named in generated reports.
    pub user: String,
    /// Home identifier, also the measurement-service home id.
    pub home: String,
    /// The day to disaggregate and report on.
    pub day: NaiveDate,
    /// Archive of labeled per-appliance traces used for training.
    pub train_archive: PathBuf,
    /// Archive of per-appliance traces for the analyzed day. Enables
    /// evaluation against ground truth, and provides the aggregate when no
    /// service URL is configured.
    #[serde(default)]
    pub test_archive: Option<PathBuf>,
    /// Base URL of a measurement service to read the day's aggregate from
    /// (e.g. `http://127.0.0.1:8080`).
    #[serde(default)]
    pub service_url: Option<String>,
    /// Longest sensor gap in seconds bridged by repeating the last value when
    /// resampling service measurements to 1 Hz.
    #[serde(default = "default_gap_fill")]
    pub gap_fill_seconds: u32,
    #[serde(default)]
    pub label: LabelConfig,
    #[serde(default)]
    pub debounce: DebounceParams,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub template: ReportTemplate,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let config: PipelineConfig =
            toml::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source: Box::new(source),
            })?;
        config.validate()?;
        Ok(config)
    }

    /// Check every invariant that TOML deserialization cannot.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.user.trim().is_empty() {
            return Err(ConfigError::Invalid("user must not be empty".into()));
        }
        if self.home.trim().is_empty() {
            return Err(ConfigError::Invalid("home must not be empty".into()));
        }
        if self.test_archive.is_none() && self.service_url.is_none() {
            return Err(ConfigError::Invalid(
                "set test_archive and/or service_url so the analyzed day has a source".into(),
            ));
        }
        if let Some(url) = &self.service_url {
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                return Err(ConfigError::Invalid(format!(
                    "service_url must start with http:// or https://, got '{url}'"
                )));
            }
            if !storage::valid_home_id(&self.home) {
                return Err(ConfigError::Invalid(format!(
                    "home '{}' is not a valid measurement-service home id",
                    self.home
                )));
            }
        }
        validate_sections(&self.label, &self.train, &self.template)
    }
}

/// Invariants that TOML deserialization cannot enforce: threshold parameters
/// arrive without going through their validating constructor, and training
/// and template settings each carry their own checks.
fn validate_sections(
    label: &LabelConfig,
    train: &TrainConfig,
    template: &ReportTemplate,
) -> Result<(), ConfigError> {
    let check_params = |p: &LabelParams, what: &str| {
        LabelParams::new(p.on_threshold_watts(), p.min_on_seconds())
            .map(|_| ())
            .map_err(|e| ConfigError::Invalid(format!("{what}: {e}")))
    };
    check_params(&label.default, "label.default")?;
    for (type_tag, params) in &label.per_type {
        check_params(params, &format!("label.per_type.{type_tag}"))?;
    }
    train
        .validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    template
        .validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(())
}

/// The tunable sections of a pipeline config, without the identity and path
/// fields. Standalone commands (synthesize, train, report, ...) accept a full
/// pipeline config file here and read only the sections they use, so unknown
/// top-level keys such as `user` or `train_archive` are deliberately ignored
/// rather than rejected.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct SectionConfig {
    #[serde(default)]
    pub label: LabelConfig,
    #[serde(default)]
    pub debounce: DebounceParams,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub template: ReportTemplate,
}

impl SectionConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let config: SectionConfig =
            toml::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source: Box::new(source),
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        validate_sections(&self.label, &self.train, &self.template)
    }
}

/// TOML shape of the storage service section (also accepted standalone).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageFileConfig {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    #[serde(default = "default_max_batch")]
    pub max_batch: usize,
}

fn default_gap_fill() -> u32 {
    10
}

fn default_listen() -> SocketAddr {
    "127.0.0.1:8080".parse().expect("valid default address")
}

fn default_max_batch() -> usize {
    storage::DEFAULT_MAX_BATCH
}

impl StorageFileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let config: StorageFileConfig =
            toml::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source: Box::new(source),
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_batch == 0 {
            return Err(ConfigError::Invalid("max_batch must be >= 1".into()));
        }
        Ok(())
    }

    pub fn to_storage_config(&self) -> StorageConfig {
        StorageConfig {
            listen: self.listen,
            data_dir: self.data_dir.clone(),
            max_batch: self.max_batch,
        }
    }
}
