use std::path::{Path, PathBuf};

use serde::Deserialize;

use crimegwr::risk::DEFAULT_GEOID_RADIUS_KM;

use crate::ServiceError;

pub const ENV_LISTEN: &str = "CRIMEGWR_LISTEN";
pub const ENV_MODEL_PATH: &str = "CRIMEGWR_MODEL_PATH";
pub const ENV_HEATMAP_DIR: &str = "CRIMEGWR_HEATMAP_DIR";
pub const ENV_CLIMATOLOGY_PATH: &str = "CRIMEGWR_CLIMATOLOGY_PATH";
pub const ENV_GEOID_RADIUS_KM: &str = "CRIMEGWR_GEOID_RADIUS_KM";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub model_path: Option<PathBuf>,
    pub heatmap_dir: Option<PathBuf>,
    /// JSON array of twelve monthly mean temperatures (null for missing months).
    /// Overrides the climatology stored in the model bundle.
    pub climatology_path: Option<PathBuf>,
    pub geoid_radius_km: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            model_path: None,
            heatmap_dir: None,
            climatology_path: None,
            geoid_radius_km: DEFAULT_GEOID_RADIUS_KM,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(s: &str) -> Result<Self, ServiceError> {
        toml::from_str(s).map_err(|e| ServiceError::Config(e.to_string()))
    }

    /// Reads the optional config file, then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ServiceError> {
        let mut cfg = match path {
            Some(p) => Self::from_toml(&std::fs::read_to_string(p)?)?,
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ServiceError> {
        if let Some(v) = lookup(ENV_LISTEN) {
            self.listen = v;
        }
        if let Some(v) = lookup(ENV_MODEL_PATH) {
            self.model_path = Some(v.into());
        }
        if let Some(v) = lookup(ENV_HEATMAP_DIR) {
            self.heatmap_dir = Some(v.into());
        }
        if let Some(v) = lookup(ENV_CLIMATOLOGY_PATH) {
            self.climatology_path = Some(v.into());
        }
        if let Some(v) = lookup(ENV_GEOID_RADIUS_KM) {
            self.geoid_radius_km = v
                .parse()
                .map_err(|_| ServiceError::Config(format!("{ENV_GEOID_RADIUS_KM}: not a number: {v}")))?;
        }
        if !(self.geoid_radius_km >= 0.0 && self.geoid_radius_km.is_finite()) {
            return Err(ServiceError::Config("geoid_radius_km must be finite and non-negative".into()));
        }
        Ok(())
    }
}
