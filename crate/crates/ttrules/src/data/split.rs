use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::binarizer::BinarizedDataset;
use crate::data::raw::Labels;
use crate::error::{Error, Result};

/// One cross-validation fold: indices held out for testing and the rest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Deterministic k-fold split over labels: stratified by class for
/// classification, plain shuffled for regression. Test sets partition the
/// indices and differ in size by at most one.
pub fn kfold_split_labels(labels: &Labels, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Param(format!("k must be >= 2, got {k}")));
    }
    let n = labels.len();
    if n < k {
        return Err(Error::Param(format!(
            "cannot split {n} samples into {k} folds"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_sets: Vec<Vec<usize>> = vec![Vec::new(); k];

    match labels {
        Labels::Classes(classes) => {
            let n_classes = classes.iter().copied().max().map_or(0, |m| m + 1);
            let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
            for (i, &c) in classes.iter().enumerate() {
                per_class[c].push(i);
            }
            for (c, members) in per_class.iter().enumerate() {
                if !members.is_empty() && members.len() < k {
                    return Err(Error::Stratification(format!(
                        "class {c} has {} members, fewer than k={k}",
                        members.len()
                    )));
                }
            }
            // A single fold cursor runs across classes so overall fold
            // sizes also differ by at most one.
            let mut cursor = 0usize;
            for members in per_class.iter_mut() {
                members.shuffle(&mut rng);
                for &i in members.iter() {
                    test_sets[cursor % k].push(i);
                    cursor += 1;
                }
            }
        }
        Labels::Values(_) => {
            let mut indices: Vec<usize> = (0..n).collect();
            indices.shuffle(&mut rng);
            for (cursor, &i) in indices.iter().enumerate() {
                test_sets[cursor % k].push(i);
            }
        }
    }

    let folds = test_sets
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; n];
            for &i in &test {
                in_test[i] = true;
            }
            let train = (0..n).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect();
    Ok(folds)
}

pub fn kfold_split(ds: &BinarizedDataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    kfold_split_labels(&ds.labels, k, seed)
}
