//! Deployment configuration: a TOML file, then `CROWDREPORT_*` environment
//! variables, then command-line flags, each overriding the previous.
//!
//! | key                    | env                                | default      |
//! |------------------------|------------------------------------|--------------|
//! | `store`                | `CROWDREPORT_STORE`                | `./store`    |
//! | `port`                 | `CROWDREPORT_PORT`                 | `8080`       |
//! | `predictor`            | `CROWDREPORT_PREDICTOR`            | `reference`  |
//! | `model`                | `CROWDREPORT_MODEL`                | built-in     |
//! | `match_ratio`          | `CROWDREPORT_MATCH_RATIO`          | `0.75`       |
//! | `default_min_matches`  | `CROWDREPORT_DEFAULT_MIN_MATCHES`  | `10`         |
//! | `tick_secs`            | `CROWDREPORT_TICK_SECS`            | `1`          |
//! | `feature_dim`          | `CROWDREPORT_FEATURE_DIM`          | `64`         |
//! | `descriptor_dim`       | `CROWDREPORT_DESCRIPTOR_DIM`       | `128`        |
//! | `predictor_retries`    | `CROWDREPORT_PREDICTOR_RETRIES`    | `3`          |
//! | `predictor_backoff_ms` | `CROWDREPORT_PREDICTOR_BACKOFF_MS` | `50`         |
//!
//! The Earth radius used for position layers is fixed at 6371.0088 km.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    ClassRegistry, EventClass, ModelError, DEFAULT_DESCRIPTOR_DIM, DEFAULT_FEATURE_DIM,
};
use crate::ptp::{ClassifierModel, PtpError, RetryPolicy};
use crate::service::Settings;
use crate::similarity::{DEFAULT_MATCH_RATIO, DEFAULT_MIN_MATCHES};

const ENV_PREFIX: &str = "CROWDREPORT_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("bad value for {key}: {value:?}")]
    Env { key: String, value: String },
    #[error(transparent)]
    Classes(#[from] ModelError),
    #[error(transparent)]
    Model(#[from] PtpError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub store: PathBuf,
    pub port: u16,
    pub predictor: String,
    pub model: Option<PathBuf>,
    pub match_ratio: f64,
    pub default_min_matches: u32,
    pub tick_secs: u64,
    pub feature_dim: usize,
    pub descriptor_dim: usize,
    pub predictor_retries: u32,
    pub predictor_backoff_ms: u64,
    pub classes: Option<Vec<EventClass>>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            store: PathBuf::from("./store"),
            port: 8080,
            predictor: "reference".into(),
            model: None,
            match_ratio: DEFAULT_MATCH_RATIO,
            default_min_matches: DEFAULT_MIN_MATCHES,
            tick_secs: 1,
            feature_dim: DEFAULT_FEATURE_DIM,
            descriptor_dim: DEFAULT_DESCRIPTOR_DIM,
            predictor_retries: 3,
            predictor_backoff_ms: 50,
            classes: None,
        }
    }
}

impl Config {
    /// Reads the file (if any) and applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        config.apply_env(std::env::vars())?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn apply_env(
        &mut self,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::Env {
                key: key.to_string(),
                value: value.to_string(),
            })
        }
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            match name {
                "STORE" => self.store = PathBuf::from(&value),
                "PORT" => self.port = parse(&key, &value)?,
                "PREDICTOR" => self.predictor = value.clone(),
                "MODEL" => self.model = Some(PathBuf::from(&value)),
                "MATCH_RATIO" => self.match_ratio = parse(&key, &value)?,
                "DEFAULT_MIN_MATCHES" => self.default_min_matches = parse(&key, &value)?,
                "TICK_SECS" => self.tick_secs = parse(&key, &value)?,
                "FEATURE_DIM" => self.feature_dim = parse(&key, &value)?,
                "DESCRIPTOR_DIM" => self.descriptor_dim = parse(&key, &value)?,
                "PREDICTOR_RETRIES" => self.predictor_retries = parse(&key, &value)?,
                "PREDICTOR_BACKOFF_MS" => self.predictor_backoff_ms = parse(&key, &value)?,
                _ => log::warn!("ignoring unknown setting {key}"),
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> Result<ClassRegistry, ConfigError> {
        match &self.classes {
            Some(list) => Ok(ClassRegistry::new(list.clone())?),
            None => Ok(ClassRegistry::default()),
        }
    }

    pub fn tick(&self) -> Duration {
        Duration::from_secs(self.tick_secs.max(1))
    }

    /// The configured centroid file, or axis-aligned block centroids.
    pub fn reference_model(&self, classes: &ClassRegistry) -> Result<ClassifierModel, ConfigError> {
        let model = match &self.model {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.clone(),
                    source,
                })?;
                serde_json::from_str::<ClassifierModel>(&text).map_err(|e| ConfigError::Parse {
                    path: path.clone(),
                    message: e.to_string(),
                })?
            }
            None => ClassifierModel::block_centroids(classes, self.feature_dim, 1.0)?,
        };
        model.check_registry(classes)?;
        if model.dim() != self.feature_dim {
            return Err(ConfigError::Invalid(format!(
                "model dimension {} differs from feature_dim {}",
                model.dim(),
                self.feature_dim
            )));
        }
        Ok(model)
    }

    pub fn settings(&self) -> Result<Settings, ConfigError> {
        if !(self.match_ratio > 0.0 && self.match_ratio < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "match_ratio {} must lie in (0, 1)",
                self.match_ratio
            )));
        }
        if self.default_min_matches == 0 {
            return Err(ConfigError::Invalid(
                "default_min_matches must be at least 1".into(),
            ));
        }
        Ok(Settings {
            classes: self.classes()?,
            match_ratio: self.match_ratio,
            default_min_matches: self.default_min_matches,
            feature_dim: self.feature_dim,
            descriptor_dim: self.descriptor_dim,
            retry: RetryPolicy {
                max_attempts: self.predictor_retries.max(1),
                backoff: Duration::from_millis(self.predictor_backoff_ms),
            },
        })
    }
}
