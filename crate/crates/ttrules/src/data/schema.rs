use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a raw column is encoded into bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeatureKind {
    /// Thermometer-coded against fitted quantile thresholds.
    Continuous { n_thresholds: usize },
    /// One-hot over the declared categories.
    Categorical { categories: Vec<String> },
    /// Column already holds 0/1; passed through as a single bit.
    AlreadyBinary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn continuous(name: &str, n_thresholds: usize) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Continuous { n_thresholds },
        }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Categorical {
                categories: categories.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    pub fn binary(name: &str) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::AlreadyBinary,
        }
    }
}

/// Declarative description of the input table: feature columns and target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub target: String,
    pub features: Vec<FeatureSpec>,
}

impl Schema {
    pub fn new(features: Vec<FeatureSpec>, target: &str) -> Result<Self> {
        let schema = Schema {
            target: target.to_string(),
            features,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for spec in &self.features {
            if !seen.insert(spec.name.as_str()) {
                return Err(Error::Schema(format!(
                    "duplicate feature name '{}'",
                    spec.name
                )));
            }
            match &spec.kind {
                FeatureKind::Continuous { n_thresholds } => {
                    if *n_thresholds < 1 {
                        return Err(Error::Schema(format!(
                            "feature '{}': n_thresholds must be >= 1",
                            spec.name
                        )));
                    }
                }
                FeatureKind::Categorical { categories } => {
                    let distinct: HashSet<_> = categories.iter().collect();
                    if distinct.len() < 2 {
                        return Err(Error::Schema(format!(
                            "feature '{}': categorical features need >= 2 distinct categories",
                            spec.name
                        )));
                    }
                    if distinct.len() != categories.len() {
                        return Err(Error::Schema(format!(
                            "feature '{}': duplicate category label",
                            spec.name
                        )));
                    }
                }
                FeatureKind::AlreadyBinary => {}
            }
        }
        if self.features.is_empty() {
            return Err(Error::Schema("schema lists no features".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Schema(format!("cannot read schema file {}: {e}", path.display()))
        })?;
        let schema: Schema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }
}

/// Task kind as requested in a pipeline config (class count not yet bound).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Binary,
    Multiclass,
    Regression,
}

/// Task kind with the class count bound from data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Binary,
    Multiclass(usize),
    Regression,
}

impl Task {
    pub fn kind(&self) -> TaskKind {
        match self {
            Task::Binary => TaskKind::Binary,
            Task::Multiclass(_) => TaskKind::Multiclass,
            Task::Regression => TaskKind::Regression,
        }
    }

    /// Number of score outputs: one per class for multiclass, otherwise one.
    pub fn n_outputs(&self) -> usize {
        match self {
            Task::Multiclass(n) => *n,
            _ => 1,
        }
    }

    pub fn is_classification(&self) -> bool {
        !matches!(self, Task::Regression)
    }
}
