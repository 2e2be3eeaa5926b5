//! Versioned JSON artifacts. Every file embeds the pipeline seed, the
//! config hash, and a checksum over its stable content; volatile content
//! (timings) sits outside the checksum so re-runs reproduce it bit for
//! bit.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::data::{BinarizerMap, Task};
use crate::error::{Error, Result};
use crate::net::{Standardization, TTnetModel};
use crate::rules::DnfFormula;
use crate::ruleset::{Rule, RuleSet};

pub const FORMAT_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Serialize + DeserializeOwned")]
pub struct Artifact<T> {
    pub format_version: u32,
    pub seed: u64,
    pub config_sha256: String,
    pub body: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volatile: Option<serde_json::Value>,
    pub sha256: String,
}

fn body_checksum<T: Serialize>(
    version: u32,
    seed: u64,
    config_sha256: &str,
    body: &T,
) -> Result<String> {
    let canonical = serde_json::to_string(&(version, seed, config_sha256, body))?;
    Ok(sha256_hex(canonical.as_bytes()))
}

pub fn write_artifact<T: Serialize + DeserializeOwned>(
    path: &Path,
    seed: u64,
    config_sha256: &str,
    body: T,
    volatile: Option<serde_json::Value>,
) -> Result<()> {
    let sha256 = body_checksum(FORMAT_VERSION, seed, config_sha256, &body)?;
    let artifact = Artifact {
        format_version: FORMAT_VERSION,
        seed,
        config_sha256: config_sha256.to_string(),
        body,
        volatile,
        sha256,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(&artifact)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Load and checksum-verify an artifact; a tampered file is refused.
pub fn read_artifact<T: Serialize + DeserializeOwned>(path: &Path) -> Result<Artifact<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let artifact: Artifact<T> = serde_json::from_str(&text)?;
    if artifact.format_version != FORMAT_VERSION {
        return Err(Error::Integrity(format!(
            "{}: format version {} unsupported (expected {FORMAT_VERSION})",
            path.display(),
            artifact.format_version
        )));
    }
    let expect = body_checksum(
        artifact.format_version,
        artifact.seed,
        &artifact.config_sha256,
        &artifact.body,
    )?;
    if expect != artifact.sha256 {
        return Err(Error::Integrity(format!(
            "{}: checksum mismatch (file corrupted or edited)",
            path.display()
        )));
    }
    Ok(artifact)
}

/// Body of `model.json`: config, fitted binarizer, trained parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelBody {
    pub config: PipelineConfig,
    pub binarizer: BinarizerMap,
    pub model: TTnetModel,
    pub best_epoch: usize,
    pub val_metric: f64,
}

/// One rule as stored in `ruleset.json`: indices, human-readable bit
/// names, cube patterns, weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleEntry {
    pub name: String,
    pub input_indices: Vec<usize>,
    pub bit_names: Vec<String>,
    pub cubes: Vec<String>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleSetBody {
    pub rules: Vec<RuleEntry>,
    pub bias: Vec<f64>,
    pub task: Task,
    pub standardization: Option<Standardization>,
    pub map: BinarizerMap,
}

impl RuleSetBody {
    pub fn from_ruleset(rs: &RuleSet) -> Self {
        let rules = rs
            .rules
            .iter()
            .map(|r| RuleEntry {
                name: r.name.clone(),
                input_indices: r.formula.input_indices.clone(),
                bit_names: r
                    .formula
                    .input_indices
                    .iter()
                    .map(|&i| rs.map.bit_names[i].clone())
                    .collect(),
                cubes: r
                    .formula
                    .cubes
                    .iter()
                    .map(|c| c.to_pattern(r.formula.k))
                    .collect(),
                weights: r.weights.clone(),
            })
            .collect();
        RuleSetBody {
            rules,
            bias: rs.bias.clone(),
            task: rs.task,
            standardization: rs.standardization,
            map: rs.map.clone(),
        }
    }

    pub fn into_ruleset(self) -> Result<RuleSet> {
        let rules = self
            .rules
            .into_iter()
            .map(|entry| {
                let k = entry.input_indices.len();
                let cubes = entry
                    .cubes
                    .iter()
                    .map(|p| {
                        if p.len() != k {
                            return Err(Error::Value(format!(
                                "rule {}: cube '{p}' is not {k} characters",
                                entry.name
                            )));
                        }
                        crate::rules::Cube::from_pattern(p)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Rule {
                    name: entry.name,
                    formula: DnfFormula {
                        k,
                        input_indices: entry.input_indices,
                        cubes,
                    },
                    weights: entry.weights,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RuleSet {
            rules,
            bias: self.bias,
            task: self.task,
            map: self.map,
            standardization: self.standardization,
        })
    }
}
