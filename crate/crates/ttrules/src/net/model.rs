use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{BinarizedDataset, BitMatrix, Task};
use crate::error::{Error, Result};

/// Fan-in bound; keeps 2^k truth-table enumeration cheap.
pub const MAX_FAN_IN: usize = 10;

/// One learning-truth-table filter: a tiny affine/relu/affine block over k
/// input bits, hardened to a single output bit by a step activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LttFilter {
    /// Global bit positions this filter reads (all distinct).
    pub input_indices: Vec<usize>,
    /// First affine layer, `hidden x k`.
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    /// Second affine layer, `hidden -> 1`.
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl LttFilter {
    pub fn fan_in(&self) -> usize {
        self.input_indices.len()
    }

    pub fn hidden_width(&self) -> usize {
        self.b1.len()
    }

    /// Pre-activation z for a patch given as 0/1 floats.
    pub fn pre_activation(&self, patch: &[f64]) -> f64 {
        debug_assert_eq!(patch.len(), self.fan_in());
        let mut z = self.b2;
        for (row, (&b, &w)) in self.w1.iter().zip(self.b1.iter().zip(&self.w2)) {
            let mut h = b;
            for (&wij, &x) in row.iter().zip(patch) {
                h += wij * x;
            }
            if h > 0.0 {
                z += w * h;
            }
        }
        z
    }

    /// step(w2 . relu(W1 x + b1) + b2), step(z) = 1 iff z >= 0.
    pub fn forward_bits(&self, patch: &[bool]) -> bool {
        let floats: Vec<f64> = patch.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        self.pre_activation(&floats) >= 0.0
    }

    /// Same, with the patch packed as an integer: bit j = input j.
    pub fn forward_code(&self, code: u16) -> bool {
        let floats: Vec<f64> = (0..self.fan_in())
            .map(|j| ((code >> j) & 1) as f64)
            .collect();
        self.pre_activation(&floats) >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadMode {
    Float,
    Ternary,
}

/// Linear output layer over the filter bits. One weight row per output
/// (classes for multiclass, a single row otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub mode: HeadMode,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LinearHead {
    pub fn n_outputs(&self) -> usize {
        self.weights.len()
    }

    pub fn n_filters(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn validate(&self, n_filters: usize) -> Result<()> {
        if self.weights.len() != self.bias.len() {
            return Err(Error::Shape("head weight/bias row mismatch".into()));
        }
        for row in &self.weights {
            if row.len() != n_filters {
                return Err(Error::Shape(format!(
                    "head weight row has {} entries for {n_filters} filters",
                    row.len()
                )));
            }
        }
        if self.mode == HeadMode::Ternary {
            let ok = self
                .weights
                .iter()
                .flatten()
                .all(|&w| w == -1.0 || w == 0.0 || w == 1.0);
            if !ok {
                return Err(Error::Value(
                    "ternary head holds a weight outside {-1,0,1}".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Target standardization constants recorded with regression models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Class(usize),
    Value(f64),
}

/// One truth-table layer plus a linear head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTnetModel {
    pub filters: Vec<LttFilter>,
    pub head: LinearHead,
    pub input_bits: usize,
    pub task: Task,
    pub standardization: Option<Standardization>,
}

impl TTnetModel {
    /// Filter output bits for one input row of the dataset.
    pub fn filter_bits_for_row(&self, bits: &BitMatrix, row: usize) -> Vec<bool> {
        self.filters
            .iter()
            .map(|f| {
                let patch: Vec<bool> = f.input_indices.iter().map(|&i| bits.get(row, i)).collect();
                f.forward_bits(&patch)
            })
            .collect()
    }

    /// Head scores from filter bits.
    pub fn scores_from_bits(&self, filter_bits: &[bool]) -> Vec<f64> {
        self.head
            .weights
            .iter()
            .zip(&self.head.bias)
            .map(|(row, &b)| {
                let mut s = b;
                for (&w, &fb) in row.iter().zip(filter_bits) {
                    s += w * if fb { 1.0 } else { 0.0 };
                }
                s
            })
            .collect()
    }

    /// Full forward pass: per-class scores (single score for binary and
    /// regression). Regression scores are in standardized space.
    pub fn forward(&self, input: &[bool]) -> Result<Vec<f64>> {
        if input.len() != self.input_bits {
            return Err(Error::Shape(format!(
                "input has {} bits, model expects {}",
                input.len(),
                self.input_bits
            )));
        }
        let filter_bits: Vec<bool> = self
            .filters
            .iter()
            .map(|f| {
                let patch: Vec<bool> = f.input_indices.iter().map(|&i| input[i]).collect();
                f.forward_bits(&patch)
            })
            .collect();
        Ok(self.scores_from_bits(&filter_bits))
    }

    pub fn scores_for_row(&self, bits: &BitMatrix, row: usize) -> Vec<f64> {
        let fb = self.filter_bits_for_row(bits, row);
        self.scores_from_bits(&fb)
    }

    /// Decision rule shared with the extracted rule sets: binary fires at
    /// score > 0, multiclass takes the argmax (ties to the lowest class),
    /// regression un-standardizes.
    pub fn decide(&self, scores: &[f64]) -> Prediction {
        decide(self.task, scores, self.standardization)
    }

    pub fn predict(&self, input: &[bool]) -> Result<Prediction> {
        Ok(self.decide(&self.forward(input)?))
    }

    pub fn validate(&self) -> Result<()> {
        for f in &self.filters {
            let k = f.fan_in();
            if k == 0 || k > MAX_FAN_IN {
                return Err(Error::Param(format!(
                    "filter fan-in {k} outside 1..={MAX_FAN_IN}"
                )));
            }
            let mut seen = f.input_indices.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != k {
                return Err(Error::Param("filter input indices not distinct".into()));
            }
            if seen.last().copied().unwrap_or(0) >= self.input_bits {
                return Err(Error::Param("filter input index out of range".into()));
            }
        }
        self.head.validate(self.filters.len())?;
        Ok(())
    }
}

pub fn decide(task: Task, scores: &[f64], standardization: Option<Standardization>) -> Prediction {
    match task {
        Task::Binary => Prediction::Class(usize::from(scores[0] > 0.0)),
        Task::Multiclass(_) => {
            let mut best = 0;
            for (c, &s) in scores.iter().enumerate() {
                if s > scores[best] {
                    best = c;
                }
            }
            Prediction::Class(best)
        }
        Task::Regression => {
            let s = standardization.unwrap_or(Standardization {
                mean: 0.0,
                std: 1.0,
            });
            Prediction::Value(scores[0] * s.std + s.mean)
        }
    }
}

/// Build an untrained model. Filter connectivity is a set of contiguous
/// fan-in-sized windows over one seeded permutation of the input bits, so
/// coverage per bit differs by at most one; configurations that leave bits
/// unread are allowed and logged (they act as feature selection).
pub fn build_model(
    total_bits: usize,
    n_filters: usize,
    k: usize,
    hidden_width: usize,
    task: Task,
    seed: u64,
) -> Result<TTnetModel> {
    if n_filters == 0 {
        return Err(Error::Param("n_filters must be >= 1".into()));
    }
    if k == 0 || k > MAX_FAN_IN {
        return Err(Error::Param(format!(
            "fan-in k={k} outside 1..={MAX_FAN_IN}"
        )));
    }
    if k > total_bits {
        return Err(Error::Param(format!(
            "fan-in k={k} larger than total_bits={total_bits}"
        )));
    }
    if hidden_width == 0 {
        return Err(Error::Param("hidden_width must be >= 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..total_bits).collect();
    use rand::seq::SliceRandom;
    perm.shuffle(&mut rng);

    if n_filters * k < total_bits {
        log::warn!(
            "{} of {total_bits} input bits are read by no filter (n_filters={n_filters}, k={k})",
            total_bits - n_filters * k
        );
    }

    let scale = 1.0 / (k as f64).sqrt();
    let mut filters = Vec::with_capacity(n_filters);
    for i in 0..n_filters {
        let input_indices: Vec<usize> = (0..k).map(|j| perm[(i * k + j) % total_bits]).collect();
        let w1 = (0..hidden_width)
            .map(|_| (0..k).map(|_| rng.gen_range(-scale..scale)).collect())
            .collect();
        let b1 = (0..hidden_width)
            .map(|_| rng.gen_range(-scale..scale))
            .collect();
        let w2 = (0..hidden_width)
            .map(|_| rng.gen_range(-scale..scale))
            .collect();
        let b2 = rng.gen_range(-scale..scale);
        filters.push(LttFilter {
            input_indices,
            w1,
            b1,
            w2,
            b2,
        });
    }

    let n_outputs = task.n_outputs();
    let head_scale = 1.0 / (n_filters as f64).sqrt();
    let weights = (0..n_outputs)
        .map(|_| {
            (0..n_filters)
                .map(|_| rng.gen_range(-head_scale..head_scale))
                .collect()
        })
        .collect();
    let head = LinearHead {
        mode: HeadMode::Float,
        weights,
        bias: vec![0.0; n_outputs],
    };

    let model = TTnetModel {
        filters,
        head,
        input_bits: total_bits,
        task,
        standardization: None,
    };
    model.validate()?;
    Ok(model)
}

/// Number of distinct input bits read by any filter.
pub fn bits_read(model: &TTnetModel) -> usize {
    let mut seen = vec![false; model.input_bits];
    for f in &model.filters {
        for &i in &f.input_indices {
            seen[i] = true;
        }
    }
    seen.iter().filter(|&&b| b).count()
}

/// Standardize helper shared by training and dataset statistics.
pub fn target_standardization(values: &[f64]) -> Standardization {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    Standardization {
        mean,
        std: if std > 0.0 { std } else { 1.0 },
    }
}

/// Drop the filters whose head weight is zero in every output row. Scores
/// are unchanged on every input.
pub fn drop_zero_weight_filters(model: &TTnetModel) -> TTnetModel {
    let keep: Vec<usize> = (0..model.filters.len())
        .filter(|&f| model.head.weights.iter().any(|row| row[f] != 0.0))
        .collect();
    let filters = keep.iter().map(|&f| model.filters[f].clone()).collect();
    let weights = model
        .head
        .weights
        .iter()
        .map(|row| keep.iter().map(|&f| row[f]).collect())
        .collect();
    TTnetModel {
        filters,
        head: LinearHead {
            mode: model.head.mode,
            weights,
            bias: model.head.bias.clone(),
        },
        input_bits: model.input_bits,
        task: model.task,
        standardization: model.standardization,
    }
}

/// Per-filter patch occurrence counts over a dataset; row r of table f
/// counts how often filter f saw patch code r.
pub fn collect_patch_support(model: &TTnetModel, ds: &BinarizedDataset) -> Vec<Vec<u32>> {
    let mut support: Vec<Vec<u32>> = model
        .filters
        .iter()
        .map(|f| vec![0u32; 1 << f.fan_in()])
        .collect();
    for row in 0..ds.n_rows() {
        for (f, filter) in model.filters.iter().enumerate() {
            let code = ds.bits.gather(row, &filter.input_indices);
            support[f][code as usize] += 1;
        }
    }
    support
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Filter computing AND of its 2 inputs, from the hand-set parameters
    /// W1=[[1,1]], b1=0, w2=[1], b2=-1.5.
    pub(crate) fn and_filter(indices: [usize; 2]) -> LttFilter {
        LttFilter {
            input_indices: indices.to_vec(),
            w1: vec![vec![1.0, 1.0]],
            b1: vec![0.0],
            w2: vec![1.0],
            b2: -1.5,
        }
    }

    #[test]
    fn and_filter_truth() {
        let f = and_filter([0, 1]);
        assert!(f.forward_bits(&[true, true]));
        assert!(!f.forward_bits(&[false, true]));
        assert!(!f.forward_bits(&[true, false]));
        assert!(!f.forward_bits(&[false, false]));
    }

    #[test]
    fn filter_forward_is_pure() {
        let model = build_model(8, 3, 4, 4, Task::Binary, 11).unwrap();
        let f = &model.filters[0];
        for code in 0..16u16 {
            assert_eq!(f.forward_code(code), f.forward_code(code));
        }
    }

    #[test]
    fn contiguous_windows_partition_bits() {
        let model = build_model(12, 2, 6, 4, Task::Binary, 3).unwrap();
        let mut all: Vec<usize> = model
            .filters
            .iter()
            .flat_map(|f| f.input_indices.iter().copied())
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn build_is_deterministic() {
        let a = build_model(30, 5, 4, 4, Task::Multiclass(3), 9).unwrap();
        let b = build_model(30, 5, 4, 4, Task::Multiclass(3), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wide_input_reads_bounded_bits() {
        let model = build_model(20530, 1064, 6, 2, Task::Regression, 1).unwrap();
        assert!(bits_read(&model) <= 1064 * 6);
        assert_eq!(model.filters.len(), 1064);
    }

    #[test]
    fn coverage_differs_by_at_most_one() {
        // more slots than bits: coverage is ceil or floor of the ratio
        let model = build_model(10, 4, 4, 2, Task::Binary, 5).unwrap();
        let mut counts = vec![0usize; 10];
        for f in &model.filters {
            for &i in &f.input_indices {
                counts[i] += 1;
            }
        }
        let (lo, hi) = (16usize / 10, 16usize.div_ceil(10));
        assert!(counts.iter().all(|&c| c == lo || c == hi), "{counts:?}");
    }

    #[test]
    fn forward_is_head_dot_filter_bits() {
        let mut model = build_model(4, 2, 2, 2, Task::Binary, 2).unwrap();
        model.filters[0] = and_filter([0, 1]);
        model.filters[1] = and_filter([2, 3]);
        model.head.weights = vec![vec![0.5, -1.0]];
        model.head.bias = vec![0.1];
        let scores = model.forward(&[true, true, true, false]).unwrap();
        assert!((scores[0] - 0.6).abs() < 1e-12);
        // all-zero filter outputs give the bias back
        let scores = model.forward(&[false, false, false, false]).unwrap();
        assert!((scores[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn ternary_head_score_arithmetic() {
        let mut model = build_model(6, 3, 2, 2, Task::Binary, 2).unwrap();
        model.filters = vec![and_filter([0, 1]), and_filter([2, 3]), and_filter([4, 5])];
        model.head = LinearHead {
            mode: HeadMode::Ternary,
            weights: vec![vec![1.0, -1.0, 1.0]],
            bias: vec![0.0],
        };
        // filter outputs (1,1,0)
        let scores = model
            .forward(&[true, true, true, true, true, false])
            .unwrap();
        assert_eq!(scores[0], 0.0);
    }

    #[test]
    fn length_mismatch_is_shape_error() {
        let model = build_model(8, 2, 2, 2, Task::Binary, 0).unwrap();
        assert!(matches!(model.forward(&[true; 7]), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_weight_filter_drop_preserves_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut model = build_model(10, 4, 3, 3, Task::Multiclass(3), 4).unwrap();
        for row in model.head.weights.iter_mut() {
            row[2] = 0.0;
        }
        let pruned = drop_zero_weight_filters(&model);
        assert_eq!(pruned.filters.len(), 3);
        for _ in 0..200 {
            let input: Vec<bool> = (0..10).map(|_| rng.gen_bool(0.5)).collect();
            assert_eq!(
                model.forward(&input).unwrap(),
                pruned.forward(&input).unwrap()
            );
        }
    }

    #[test]
    fn multiclass_argmax_breaks_ties_low() {
        let model = build_model(4, 2, 2, 2, Task::Multiclass(3), 0).unwrap();
        assert_eq!(model.decide(&[0.3, 0.3, 0.1]), Prediction::Class(0));
        assert_eq!(model.decide(&[0.1, 0.5, 0.5]), Prediction::Class(1));
    }

    #[test]
    fn binary_zero_score_is_class_zero() {
        let model = build_model(4, 2, 2, 2, Task::Binary, 0).unwrap();
        assert_eq!(model.decide(&[0.0]), Prediction::Class(0));
        assert_eq!(model.decide(&[2.0]), Prediction::Class(1));
    }
}
