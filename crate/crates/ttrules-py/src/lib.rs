//! Python bindings: a `Pipeline` class driving the train/extract/verify
//! stages in-process, plus the evaluation metrics and the config-driven
//! cross-validation entry point.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ttrules::bdd::BddStore;
use ttrules::config::PipelineConfig;
use ttrules::data::{
    binarize, fit_binarizer, load_csv, BinarizedDataset, BinarizerMap, Schema, TaskKind,
};
use ttrules::eval::cross_validate as cv;
use ttrules::io::RuleSetBody;
use ttrules::net::{
    build_model, collect_patch_support, ternarize_head, train, validation_metric, Hyperparams,
    Prediction, TTnetModel,
};
use ttrules::rules::{extract_rules, DontCareFlags};
use ttrules::ruleset::{optimize_ruleset, verify_exactness, RuleSet};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_task(task: &str) -> PyResult<TaskKind> {
    match task {
        "binary" => Ok(TaskKind::Binary),
        "multiclass" => Ok(TaskKind::Multiclass),
        "regression" => Ok(TaskKind::Regression),
        other => Err(PyValueError::new_err(format!(
            "unknown task '{other}' (expected binary/multiclass/regression)"
        ))),
    }
}

struct Fitted {
    map: BinarizerMap,
    ds: BinarizedDataset,
    model: TTnetModel,
}

/// The TT-rules pipeline on one dataset: binarize, train, extract an
/// exactly equivalent weighted rule set, and inspect it.
#[pyclass]
struct Pipeline {
    schema: Schema,
    task: TaskKind,
    n_filters: usize,
    k: usize,
    hidden_width: usize,
    seed: u64,
    fitted: Option<Fitted>,
    ruleset: Option<RuleSet>,
}

#[pymethods]
impl Pipeline {
    /// Args: schema_json is the same schema document the CLI uses
    /// (features + target); task is binary/multiclass/regression.
    #[new]
    #[pyo3(signature = (schema_json, task="binary", n_filters=8, k=3, hidden_width=4, seed=0))]
    fn new(
        schema_json: &str,
        task: &str,
        n_filters: usize,
        k: usize,
        hidden_width: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let schema: Schema = serde_json::from_str(schema_json).map_err(err)?;
        schema.validate().map_err(err)?;
        Ok(Pipeline {
            schema,
            task: parse_task(task)?,
            n_filters,
            k,
            hidden_width,
            seed,
            fitted: None,
            ruleset: None,
        })
    }

    /// Fit the binarizer and train the network on a CSV. Returns the
    /// training-set metric (AUC / accuracy / RMSE by task).
    #[pyo3(signature = (csv_path, epochs=100, batch_size=32, learning_rate=0.1,
                        weight_decay=1e-4, l1_head=1e-3))]
    #[allow(clippy::too_many_arguments)]
    fn fit_csv(
        &mut self,
        csv_path: &str,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        weight_decay: f64,
        l1_head: f64,
    ) -> PyResult<f64> {
        let raw = load_csv(Path::new(csv_path), &self.schema).map_err(err)?;
        let map = fit_binarizer(&raw).map_err(err)?;
        let ds = binarize(&raw, &map, self.task).map_err(err)?;
        let model = build_model(
            map.total_bits,
            self.n_filters,
            self.k,
            self.hidden_width,
            ds.task,
            self.seed,
        )
        .map_err(err)?;
        let hp = Hyperparams {
            epochs,
            batch_size,
            learning_rate,
            weight_decay,
            l1_head,
            seed: self.seed,
        };
        let trained = train(&model, &ds, &ds, &hp).map_err(err)?;
        let metric = validation_metric(&trained.model, &ds).map_err(err)?;
        self.fitted = Some(Fitted {
            map,
            ds,
            model: trained.model,
        });
        self.ruleset = None;
        Ok(display_metric(self.task, metric))
    }

    /// Quantize the trained head to {-1,0,+1} weights.
    fn ternarize(&mut self) -> PyResult<()> {
        let fitted = self.fitted_mut()?;
        fitted.model = ternarize_head(&fitted.model, &fitted.ds).map_err(err)?;
        self.ruleset = None;
        Ok(())
    }

    /// Extract and optimize the rule set. Returns the rule count.
    #[pyo3(signature = (corr_threshold=1.0, unseen_dontcare=false))]
    fn extract(&mut self, corr_threshold: f64, unseen_dontcare: bool) -> PyResult<usize> {
        let fitted = self.fitted_ref()?;
        let support = collect_patch_support(&fitted.model, &fitted.ds);
        let flags = DontCareFlags {
            unseen_patterns: unseen_dontcare,
        };
        let ruleset = extract_rules(&fitted.model, &fitted.map, &support, flags).map_err(err)?;
        let (ruleset, _) = optimize_ruleset(&ruleset, &fitted.ds, corr_threshold).map_err(err)?;
        let n = ruleset.rules.len();
        self.ruleset = Some(ruleset);
        Ok(n)
    }

    /// Fraction of training rows where the rule set and the network
    /// predict identically (1.0 under lossless settings).
    fn verify_exactness(&self) -> PyResult<f64> {
        let fitted = self.fitted_ref()?;
        let ruleset = self.ruleset_ref()?;
        let report = verify_exactness(ruleset, &fitted.model, &fitted.ds).map_err(err)?;
        Ok(report.agreement)
    }

    /// Rule-set predictions for every row of a CSV with the same schema.
    /// Classes come back as integers, regression values as floats.
    fn predict_csv(&self, csv_path: &str) -> PyResult<Vec<f64>> {
        let fitted = self.fitted_ref()?;
        let ruleset = self.ruleset_ref()?;
        let raw = load_csv(Path::new(csv_path), &self.schema).map_err(err)?;
        let ds = binarize(&raw, &fitted.map, self.task).map_err(err)?;
        Ok((0..ds.n_rows())
            .map(|row| match ruleset.predict(&ds.bits.row_bits(row)) {
                Prediction::Class(c) => c as f64,
                Prediction::Value(v) => v,
            })
            .collect())
    }

    /// Pre-threshold rule-sum scores (one row per sample).
    fn scores_csv(&self, csv_path: &str) -> PyResult<Vec<Vec<f64>>> {
        let fitted = self.fitted_ref()?;
        let ruleset = self.ruleset_ref()?;
        let raw = load_csv(Path::new(csv_path), &self.schema).map_err(err)?;
        let ds = binarize(&raw, &fitted.map, self.task).map_err(err)?;
        Ok((0..ds.n_rows())
            .map(|row| ruleset.scores(&ds.bits.row_bits(row)))
            .collect())
    }

    /// One line per rule with named conditions.
    fn rules_text(&self) -> PyResult<String> {
        Ok(self.ruleset_ref()?.to_text())
    }

    /// The ruleset.json document (same format the CLI writes).
    fn ruleset_json(&self) -> PyResult<String> {
        let body = RuleSetBody::from_ruleset(self.ruleset_ref()?);
        serde_json::to_string_pretty(&body).map_err(err)
    }

    /// Combined DOT graph of all rule diagrams.
    fn rules_dot(&self) -> PyResult<String> {
        let ruleset = self.ruleset_ref()?;
        let mut store = BddStore::for_ruleset(ruleset).map_err(err)?;
        let mut roots = Vec::new();
        for rule in &ruleset.rules {
            let root = store.build_from_dnf(&rule.formula).map_err(err)?;
            roots.push((rule.name.clone(), root));
        }
        store.to_dot_combined(&roots).map_err(err)
    }

    fn n_rules(&self) -> PyResult<usize> {
        Ok(self.ruleset_ref()?.rules.len())
    }

    fn total_bits(&self) -> PyResult<usize> {
        Ok(self.fitted_ref()?.map.total_bits)
    }

    fn bit_names(&self) -> PyResult<Vec<String>> {
        Ok(self.fitted_ref()?.map.bit_names.clone())
    }

    fn __repr__(&self) -> String {
        format!(
            "Pipeline(task={:?}, n_filters={}, k={}, fitted={}, rules={})",
            self.task,
            self.n_filters,
            self.k,
            self.fitted.is_some(),
            self.ruleset.as_ref().map_or(0, |r| r.rules.len()),
        )
    }
}

impl Pipeline {
    fn fitted_ref(&self) -> PyResult<&Fitted> {
        self.fitted
            .as_ref()
            .ok_or_else(|| PyRuntimeError::new_err("call fit_csv first"))
    }

    fn fitted_mut(&mut self) -> PyResult<&mut Fitted> {
        self.fitted
            .as_mut()
            .ok_or_else(|| PyRuntimeError::new_err("call fit_csv first"))
    }

    fn ruleset_ref(&self) -> PyResult<&RuleSet> {
        self.ruleset
            .as_ref()
            .ok_or_else(|| PyRuntimeError::new_err("call extract first"))
    }
}

fn display_metric(task: TaskKind, higher_better: f64) -> f64 {
    match task {
        TaskKind::Regression => -higher_better,
        _ => higher_better,
    }
}

/// ROC AUC by the Mann-Whitney statistic (ties count one half).
#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<usize>) -> PyResult<f64> {
    ttrules::eval::auc(&scores, &labels).map_err(err)
}

#[pyfunction]
fn accuracy(preds: Vec<usize>, labels: Vec<usize>) -> PyResult<f64> {
    ttrules::eval::accuracy(&preds, &labels).map_err(err)
}

#[pyfunction]
fn rmse(preds: Vec<f64>, targets: Vec<f64>) -> PyResult<f64> {
    ttrules::eval::rmse(&preds, &targets).map_err(err)
}

/// Run k-fold cross validation from a pipeline config document (the same
/// JSON the CLI takes). Returns the summary as JSON.
#[pyfunction]
#[pyo3(signature = (config_json, k=5))]
fn cross_validate(config_json: &str, k: usize) -> PyResult<String> {
    let config: PipelineConfig = serde_json::from_str(config_json).map_err(err)?;
    config.validate().map_err(err)?;
    let schema = Schema::from_json_file(&config.schema).map_err(err)?;
    let raw = load_csv(&config.dataset, &schema).map_err(err)?;
    let summary = cv(&config, &raw, k, config.seed).map_err(err)?;
    serde_json::to_string_pretty(&summary).map_err(err)
}

#[pymodule]
fn ttrules_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Pipeline>()?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    Ok(())
}
