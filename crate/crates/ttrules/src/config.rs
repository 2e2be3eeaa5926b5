use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::TaskKind;
use crate::error::{Error, Result};
use crate::net::{HeadMode, Hyperparams};
use crate::rules::DontCareFlags;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub n_filters: usize,
    #[serde(default = "default_fan_in")]
    pub k: usize,
    #[serde(default = "default_hidden_width")]
    pub hidden_width: usize,
}

fn default_fan_in() -> usize {
    6
}

fn default_hidden_width() -> usize {
    4
}

/// Everything one run needs, captured in each output artifact for
/// provenance. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: PathBuf,
    pub schema: PathBuf,
    pub task: TaskKind,
    pub architecture: Architecture,
    #[serde(default)]
    pub training: Hyperparams,
    #[serde(default = "default_head_mode")]
    pub head: HeadMode,
    #[serde(default)]
    pub dont_care: DontCareFlags,
    #[serde(default = "default_corr_threshold")]
    pub corr_threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_head_mode() -> HeadMode {
    HeadMode::Float
}

fn default_corr_threshold() -> f64 {
    1.0
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl PipelineConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        let config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.corr_threshold > 0.0 && self.corr_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "corr_threshold must be in (0, 1], got {}",
                self.corr_threshold
            )));
        }
        if self.architecture.n_filters == 0 {
            return Err(Error::Config("architecture.n_filters must be >= 1".into()));
        }
        if self.architecture.k == 0 || self.architecture.k > crate::net::MAX_FAN_IN {
            return Err(Error::Config(format!(
                "architecture.k must be in 1..={}",
                crate::net::MAX_FAN_IN
            )));
        }
        if self.architecture.hidden_width == 0 {
            return Err(Error::Config(
                "architecture.hidden_width must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical (compact) JSON form.
    pub fn sha256(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        crate::io::sha256_hex(canonical.as_bytes())
    }
}
