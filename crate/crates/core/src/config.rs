//! Pipeline configuration, read from TOML. Every field has a default, so an
//! empty file (plus input paths) is a valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::impute::ImputePolicy;
use crate::ingest::ColumnSchema;
use crate::label::DEFAULT_HYPO_THRESHOLD;
use crate::quality::PhysiologicalBounds;
use crate::windows::WindowConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// CSV files; relative paths resolve against the config file's directory.
    pub paths: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    pub threshold: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_HYPO_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Skip the quality and imputation stages; normalization and balancing still run.
    pub raw_mode: bool,
    /// Emit the per-slot raw / linear / Stineman comparison trace.
    pub write_trace: bool,
    pub input: InputConfig,
    pub schema: ColumnSchema,
    pub quality: PhysiologicalBounds,
    pub impute: ImputePolicy,
    pub label: LabelConfig,
    pub windows: WindowConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            raw_mode: false,
            write_trace: false,
            input: InputConfig::default(),
            schema: ColumnSchema::default(),
            quality: PhysiologicalBounds::default(),
            impute: ImputePolicy::default(),
            label: LabelConfig::default(),
            windows: WindowConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Loads and validates a config file, resolving relative input paths.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text).map_err(|source| ConfigError::Parse {
            path: path.into(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in &mut cfg.input.paths {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        self.quality
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.windows
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !self.impute.gaps.is_valid() {
            return invalid(format!(
                "gap boundaries need 1 <= short_max_slots < medium_max_slots, got {} and {}",
                self.impute.gaps.short_max_slots, self.impute.gaps.medium_max_slots
            ));
        }
        if self.impute.stineman.knots_per_side == 0 {
            return invalid("stineman.knots_per_side must be positive".into());
        }
        if !self.label.threshold.is_finite() {
            return invalid(format!("threshold {} is not finite", self.label.threshold));
        }
        Ok(())
    }
}
