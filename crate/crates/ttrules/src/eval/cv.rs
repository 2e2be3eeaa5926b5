use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::data::{
    binarize, fit_binarizer, kfold_split_labels, BinarizedDataset, RawDataset, Task,
};
use crate::error::{Error, Result};
use crate::eval::metrics::{accuracy, auc, rmse};
use crate::net::{
    build_model, collect_patch_support, ternarize_head, train, HeadMode, Prediction,
    Standardization,
};
use crate::rules::extract_rules;
use crate::ruleset::{optimize_ruleset, verify_exactness, RuleSet};

/// Per-fold record: the test metric comes from the extracted rule set,
/// never from the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub metric: f64,
    pub rules_initial: usize,
    pub rules_final: usize,
    pub train_agreement: f64,
    pub test_agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub metric_name: String,
    pub per_fold: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over the k fold values.
    pub std: f64,
    pub rule_counts: Vec<usize>,
    pub folds: Vec<FoldOutcome>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub fold_seconds: Vec<f64>,
}

impl CvSummary {
    pub fn table_row(&self, dataset: &str) -> String {
        let rules_mean =
            self.rule_counts.iter().sum::<usize>() as f64 / self.rule_counts.len().max(1) as f64;
        format!(
            "{dataset} | {} | {:.4} ± {:.4} | rules {rules_mean:.1}",
            self.metric_name, self.mean, self.std
        )
    }
}

pub fn metric_name(task: Task) -> &'static str {
    match task {
        Task::Binary => "AUC",
        Task::Multiclass(_) => "Accuracy",
        Task::Regression => "RMSE",
    }
}

/// Test metric of a rule set on a dataset: AUC over the pre-threshold rule
/// sums for binary, accuracy for multiclass, RMSE in original units for
/// regression.
pub fn ruleset_metric(rs: &RuleSet, ds: &BinarizedDataset) -> Result<f64> {
    let scores: Vec<Vec<f64>> = (0..ds.n_rows())
        .map(|row| rs.scores(&ds.bits.row_bits(row)))
        .collect();
    match (ds.task, &ds.labels) {
        (Task::Binary, crate::data::Labels::Classes(classes)) => {
            let s: Vec<f64> = scores.iter().map(|v| v[0]).collect();
            auc(&s, classes)
        }
        (Task::Multiclass(_), crate::data::Labels::Classes(classes)) => {
            let preds: Vec<usize> = (0..ds.n_rows())
                .map(|row| match rs.predict(&ds.bits.row_bits(row)) {
                    Prediction::Class(c) => c,
                    Prediction::Value(_) => unreachable!("classification task"),
                })
                .collect();
            accuracy(&preds, classes)
        }
        (Task::Regression, crate::data::Labels::Values(targets)) => {
            let s = rs.standardization.unwrap_or(Standardization {
                mean: 0.0,
                std: 1.0,
            });
            let preds: Vec<f64> = scores.iter().map(|v| v[0] * s.std + s.mean).collect();
            rmse(&preds, targets)
        }
        _ => Err(Error::Shape("task does not match dataset labels".into())),
    }
}

fn fold_seed(base: u64, fold: usize) -> u64 {
    base.wrapping_add((fold as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Run the full pipeline on one train/test pair: fit the binarizer on the
/// training rows only, train, extract, optimize, verify exactness, and
/// score the rule set on the test rows.
pub fn run_fold(
    config: &PipelineConfig,
    raw: &RawDataset,
    train_idx: &[usize],
    test_idx: &[usize],
    seed: u64,
) -> Result<FoldOutcome> {
    let train_raw = raw.subset(train_idx);
    let map = fit_binarizer(&train_raw)?;
    let full = binarize(raw, &map, config.task)?;
    let train_ds = full.subset(train_idx);
    let test_ds = full.subset(test_idx);

    let model = build_model(
        map.total_bits,
        config.architecture.n_filters,
        config.architecture.k,
        config.architecture.hidden_width,
        train_ds.task,
        seed,
    )?;
    let mut hp = config.training.clone();
    hp.seed = seed;
    let trained = train(&model, &train_ds, &train_ds, &hp)?;
    let model = if config.head == HeadMode::Ternary {
        ternarize_head(&trained.model, &train_ds)?
    } else {
        trained.model
    };

    let support = collect_patch_support(&model, &train_ds);
    let ruleset = extract_rules(&model, &map, &support, config.dont_care)?;
    let rules_initial = ruleset.rules.len();
    let (ruleset, _report) = optimize_ruleset(&ruleset, &train_ds, config.corr_threshold)?;

    let train_check = verify_exactness(&ruleset, &model, &train_ds)?;
    let test_check = verify_exactness(&ruleset, &model, &test_ds)?;
    let lossless = !config.dont_care.unseen_patterns;
    if lossless {
        for (name, check) in [("train", &train_check), ("test", &test_check)] {
            if check.agreement < 1.0 {
                return Err(Error::Exactness(format!(
                    "{name} agreement {:.6} under lossless settings; first mismatch row {:?}, rule {:?}",
                    check.agreement, check.first_mismatch_row, check.offending_rule
                )));
            }
        }
    }

    let metric = ruleset_metric(&ruleset, &test_ds)?;
    Ok(FoldOutcome {
        metric,
        rules_initial,
        rules_final: ruleset.rules.len(),
        train_agreement: train_check.agreement,
        test_agreement: test_check.agreement,
    })
}

/// Stratified k-fold cross validation of the whole pipeline. Each fold is
/// independent and deterministic given the seed; folds run in parallel.
pub fn cross_validate(
    config: &PipelineConfig,
    raw: &RawDataset,
    k: usize,
    seed: u64,
) -> Result<CvSummary> {
    let (labels, task) = raw.labels(config.task)?;
    let folds = kfold_split_labels(&labels, k, seed)?;

    let outcomes: Vec<(FoldOutcome, f64)> = folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| {
            let start = std::time::Instant::now();
            let outcome = run_fold(config, raw, &fold.train, &fold.test, fold_seed(seed, i))?;
            Ok((outcome, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;

    let per_fold: Vec<f64> = outcomes.iter().map(|(o, _)| o.metric).collect();
    let mean = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
    let var = per_fold
        .iter()
        .map(|m| (m - mean) * (m - mean))
        .sum::<f64>()
        / per_fold.len() as f64;
    Ok(CvSummary {
        metric_name: metric_name(task).to_string(),
        per_fold,
        mean,
        std: var.sqrt(),
        rule_counts: outcomes.iter().map(|(o, _)| o.rules_final).collect(),
        folds: outcomes.iter().map(|(o, _)| o.clone()).collect(),
        fold_seconds: outcomes.iter().map(|(_, s)| *s).collect(),
    })
}
