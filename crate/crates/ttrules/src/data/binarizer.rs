use serde::{Deserialize, Serialize};

use crate::data::bits::BitMatrix;
use crate::data::raw::{Column, Labels, RawDataset};
use crate::data::schema::{FeatureKind, Task, TaskKind};
use crate::error::{Error, Result};

/// Thresholds serialize as decimal strings so a written map reloads
/// bit-exactly.
mod f64_strings {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(values: &[f64], ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_seq(values.iter().map(|v| v.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<String> = Vec::deserialize(de)?;
        raw.iter()
            .map(|s| s.parse::<f64>().map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Fitted encoder for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoder", rename_all = "kebab-case")]
pub enum FeatureEncoder {
    /// Thermometer code: bit j is `value >= thresholds[j]`.
    Thresholds {
        feature: String,
        #[serde(with = "f64_strings")]
        thresholds: Vec<f64>,
    },
    /// One-hot over the categories observed at fit time; bit index is the
    /// position in `categories`.
    OneHot {
        feature: String,
        categories: Vec<String>,
    },
    /// Single bit copied from an already-binary column.
    Passthrough { feature: String },
}

impl FeatureEncoder {
    pub fn feature(&self) -> &str {
        match self {
            FeatureEncoder::Thresholds { feature, .. } => feature,
            FeatureEncoder::OneHot { feature, .. } => feature,
            FeatureEncoder::Passthrough { feature } => feature,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            FeatureEncoder::Thresholds { thresholds, .. } => thresholds.len(),
            FeatureEncoder::OneHot { categories, .. } => categories.len(),
            FeatureEncoder::Passthrough { .. } => 1,
        }
    }
}

/// What a single global bit means, for constraint checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitRole {
    /// `rank`-th threshold (ascending) of a thermometer group.
    Thermometer {
        rank: usize,
    },
    /// One bit of a one-hot group of `group_size` categories.
    OneHot {
        group_size: usize,
    },
    Passthrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitOrigin {
    pub feature: usize,
    pub role: BitRole,
}

/// Fitted binarization map: per-feature encoders plus derived bit metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarizerMap {
    pub encoders: Vec<FeatureEncoder>,
    pub total_bits: usize,
    pub bit_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl BinarizerMap {
    pub fn from_encoders(encoders: Vec<FeatureEncoder>, warnings: Vec<String>) -> Self {
        let total_bits = encoders.iter().map(|e| e.width()).sum();
        let mut bit_names = Vec::with_capacity(total_bits);
        for enc in &encoders {
            match enc {
                FeatureEncoder::Thresholds {
                    feature,
                    thresholds,
                } => {
                    for t in thresholds {
                        bit_names.push(format!("{feature} ≥ {t}"));
                    }
                }
                FeatureEncoder::OneHot {
                    feature,
                    categories,
                } => {
                    for c in categories {
                        bit_names.push(format!("{feature} = {c}"));
                    }
                }
                FeatureEncoder::Passthrough { feature } => bit_names.push(feature.clone()),
            }
        }
        BinarizerMap {
            encoders,
            total_bits,
            bit_names,
            warnings,
        }
    }

    /// Per-bit feature index and role, in global bit order.
    pub fn bit_origins(&self) -> Vec<BitOrigin> {
        let mut origins = Vec::with_capacity(self.total_bits);
        for (feature, enc) in self.encoders.iter().enumerate() {
            match enc {
                FeatureEncoder::Thresholds { thresholds, .. } => {
                    for rank in 0..thresholds.len() {
                        origins.push(BitOrigin {
                            feature,
                            role: BitRole::Thermometer { rank },
                        });
                    }
                }
                FeatureEncoder::OneHot { categories, .. } => {
                    for _ in categories {
                        origins.push(BitOrigin {
                            feature,
                            role: BitRole::OneHot {
                                group_size: categories.len(),
                            },
                        });
                    }
                }
                FeatureEncoder::Passthrough { .. } => origins.push(BitOrigin {
                    feature,
                    role: BitRole::Passthrough,
                }),
            }
        }
        origins
    }

    /// Whether a full-width bit vector is reachable under the encoding:
    /// thermometer groups are monotone prefixes and one-hot groups have
    /// exactly one bit set.
    pub fn is_encodable(&self, bits: &[bool]) -> bool {
        let mut offset = 0;
        for enc in &self.encoders {
            let w = enc.width();
            let group = &bits[offset..offset + w];
            match enc {
                FeatureEncoder::Thresholds { .. } => {
                    for j in 1..w {
                        if group[j] && !group[j - 1] {
                            return false;
                        }
                    }
                }
                FeatureEncoder::OneHot { .. } => {
                    if group.iter().filter(|&&b| b).count() != 1 {
                        return false;
                    }
                }
                FeatureEncoder::Passthrough { .. } => {}
            }
            offset += w;
        }
        true
    }

    pub fn validate(&self) -> Result<()> {
        let widths: usize = self.encoders.iter().map(|e| e.width()).sum();
        if widths != self.total_bits {
            return Err(Error::Value(format!(
                "total_bits {} does not match encoder widths {widths}",
                self.total_bits
            )));
        }
        if self.bit_names.len() != self.total_bits {
            return Err(Error::Value(format!(
                "bit_names length {} does not match total_bits {}",
                self.bit_names.len(),
                self.total_bits
            )));
        }
        for enc in &self.encoders {
            if let FeatureEncoder::Thresholds {
                feature,
                thresholds,
            } = enc
            {
                if thresholds.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Value(format!(
                        "feature '{feature}': thresholds not strictly ascending"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Quantile of sorted values with the midpoint interpolation rule: at
/// fractional positions the two neighbours are averaged.
fn midpoint_quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        0.5 * (sorted[lo] + sorted[hi])
    }
}

/// Fit the binarizer on a raw dataset: continuous features get thresholds
/// at the j/(m+1) quantiles (duplicates collapsed), categoricals one bit
/// per observed category in declared order.
pub fn fit_binarizer(raw: &RawDataset) -> Result<BinarizerMap> {
    if raw.n_rows == 0 {
        return Err(Error::Value(
            "cannot fit a binarizer on an empty dataset".into(),
        ));
    }
    let mut encoders = Vec::with_capacity(raw.schema.features.len());
    let mut warnings = Vec::new();
    for (spec, column) in raw.schema.features.iter().zip(&raw.columns) {
        match (&spec.kind, column) {
            (FeatureKind::Continuous { n_thresholds }, Column::Numeric(values)) => {
                let mut sorted = values.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
                let m = *n_thresholds;
                let mut thresholds: Vec<f64> = (1..=m)
                    .map(|j| midpoint_quantile(&sorted, j as f64 / (m + 1) as f64))
                    .collect();
                thresholds.dedup();
                if sorted.first() == sorted.last() {
                    warnings.push(format!(
                        "feature '{}' is constant; it contributes no bits",
                        spec.name
                    ));
                    thresholds.clear();
                }
                encoders.push(FeatureEncoder::Thresholds {
                    feature: spec.name.clone(),
                    thresholds,
                });
            }
            (FeatureKind::Categorical { categories }, Column::Text(values)) => {
                let observed: Vec<String> = categories
                    .iter()
                    .filter(|c| values.iter().any(|v| v == *c))
                    .cloned()
                    .collect();
                encoders.push(FeatureEncoder::OneHot {
                    feature: spec.name.clone(),
                    categories: observed,
                });
            }
            (FeatureKind::AlreadyBinary, Column::Numeric(_)) => {
                encoders.push(FeatureEncoder::Passthrough {
                    feature: spec.name.clone(),
                });
            }
            _ => unreachable!("column type fixed by schema"),
        }
    }
    let map = BinarizerMap::from_encoders(encoders, warnings);
    map.validate()?;
    Ok(map)
}

/// Binarized table plus the map that produced it.
#[derive(Debug, Clone)]
pub struct BinarizedDataset {
    pub bits: BitMatrix,
    pub labels: Labels,
    pub task: Task,
    pub map: BinarizerMap,
}

impl BinarizedDataset {
    pub fn n_rows(&self) -> usize {
        self.bits.rows()
    }

    pub fn total_bits(&self) -> usize {
        self.bits.cols()
    }

    /// Row subset in the given index order.
    pub fn subset(&self, indices: &[usize]) -> BinarizedDataset {
        let mut bits = BitMatrix::zeros(indices.len(), self.total_bits());
        for (r, &src) in indices.iter().enumerate() {
            for c in 0..self.total_bits() {
                if self.bits.get(src, c) {
                    bits.set(r, c, true);
                }
            }
        }
        BinarizedDataset {
            bits,
            labels: self.labels.subset(indices),
            task: self.task,
            map: self.map.clone(),
        }
    }
}

/// Apply a fitted map to raw data.
pub fn binarize(raw: &RawDataset, map: &BinarizerMap, kind: TaskKind) -> Result<BinarizedDataset> {
    if raw.schema.features.len() != map.encoders.len()
        || raw
            .schema
            .features
            .iter()
            .zip(&map.encoders)
            .any(|(s, e)| s.name != e.feature())
    {
        return Err(Error::Value(
            "binarizer map does not match the dataset schema".into(),
        ));
    }
    let mut bits = BitMatrix::zeros(raw.n_rows, map.total_bits);
    let mut offset = 0;
    for (enc, column) in map.encoders.iter().zip(&raw.columns) {
        match (enc, column) {
            (FeatureEncoder::Thresholds { thresholds, .. }, Column::Numeric(values)) => {
                for (row, &x) in values.iter().enumerate() {
                    for (j, &t) in thresholds.iter().enumerate() {
                        if x >= t {
                            bits.set(row, offset + j, true);
                        }
                    }
                }
            }
            (
                FeatureEncoder::OneHot {
                    feature,
                    categories,
                },
                Column::Text(values),
            ) => {
                for (row, value) in values.iter().enumerate() {
                    let j = categories.iter().position(|c| c == value).ok_or_else(|| {
                        Error::Value(format!(
                            "feature '{feature}': category '{value}' was not seen at fit time"
                        ))
                    })?;
                    bits.set(row, offset + j, true);
                }
            }
            (FeatureEncoder::Passthrough { .. }, Column::Numeric(values)) => {
                for (row, &x) in values.iter().enumerate() {
                    bits.set(row, offset, x == 1.0);
                }
            }
            _ => unreachable!("encoder/column kinds align by construction"),
        }
        offset += enc.width();
    }
    let (labels, task) = raw.labels(kind)?;
    if let Task::Multiclass(n) = task {
        if let Labels::Classes(ref classes) = labels {
            debug_assert!(classes.iter().all(|&c| c < n));
        }
    }
    Ok(BinarizedDataset {
        bits,
        labels,
        task,
        map: map.clone(),
    })
}
