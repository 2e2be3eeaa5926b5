//! Metrics and the cross-validation harness.

mod cv;
pub mod metrics;

pub use cv::{cross_validate, metric_name, ruleset_metric, run_fold, CvSummary, FoldOutcome};
pub use metrics::{accuracy, auc, rmse};
