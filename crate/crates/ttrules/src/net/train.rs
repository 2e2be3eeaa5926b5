use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{BinarizedDataset, Labels, Task};
use crate::error::{Error, Result};
use crate::eval::metrics::{accuracy, auc, rmse};
use crate::net::model::{
    drop_zero_weight_filters, target_standardization, HeadMode, Standardization, TTnetModel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub l1_head: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            epochs: 200,
            batch_size: 32,
            learning_rate: 0.1,
            weight_decay: 1e-4,
            l1_head: 1e-3,
            seed: 0,
        }
    }
}

const MOMENTUM: f64 = 0.9;

/// How the step activation behaves in the forward pass. `Hard` is the real
/// model; `Surrogate` replaces step(z) by clamp(z, -1, 1) so finite
/// differences are well defined. Both backpropagate the clipped-identity
/// straight-through estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationMode {
    Hard,
    Surrogate,
}

/// Gradient buffers mirroring the model parameters. Public so gradient
/// verification can walk them next to the parameters.
#[derive(Debug, Clone)]
pub struct FilterGrads {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub filters: Vec<FilterGrads>,
    pub head_weights: Vec<Vec<f64>>,
    pub head_bias: Vec<f64>,
}

impl ModelGrads {
    pub fn zeros_like(model: &TTnetModel) -> Self {
        ModelGrads {
            filters: model
                .filters
                .iter()
                .map(|f| FilterGrads {
                    w1: f.w1.iter().map(|r| vec![0.0; r.len()]).collect(),
                    b1: vec![0.0; f.b1.len()],
                    w2: vec![0.0; f.w2.len()],
                    b2: 0.0,
                })
                .collect(),
            head_weights: model
                .head
                .weights
                .iter()
                .map(|r| vec![0.0; r.len()])
                .collect(),
            head_bias: vec![0.0; model.head.bias.len()],
        }
    }

    fn scale(&mut self, c: f64) {
        for f in &mut self.filters {
            for row in &mut f.w1 {
                for v in row {
                    *v *= c;
                }
            }
            for v in &mut f.b1 {
                *v *= c;
            }
            for v in &mut f.w2 {
                *v *= c;
            }
            f.b2 *= c;
        }
        for row in &mut self.head_weights {
            for v in row {
                *v *= c;
            }
        }
        for v in &mut self.head_bias {
            *v *= c;
        }
    }
}

fn standardized_target(labels: &Labels, row: usize, std: Option<Standardization>) -> f64 {
    match labels {
        Labels::Values(v) => {
            let s = std.expect("regression needs standardization");
            (v[row] - s.mean) / s.std
        }
        Labels::Classes(_) => unreachable!("regression labels expected"),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Mean loss over `rows` and its gradients. The data loss only; penalties
/// are applied at the update step.
pub fn loss_and_grads(
    model: &TTnetModel,
    ds: &BinarizedDataset,
    rows: &[usize],
    mode: ActivationMode,
) -> (f64, ModelGrads) {
    let mut grads = ModelGrads::zeros_like(model);
    let mut total_loss = 0.0;
    let n_outputs = model.head.n_outputs();

    for &row in rows {
        // forward, keeping per-filter intermediates
        let mut patches: Vec<Vec<f64>> = Vec::with_capacity(model.filters.len());
        let mut hiddens: Vec<Vec<f64>> = Vec::with_capacity(model.filters.len());
        let mut pre_acts: Vec<f64> = Vec::with_capacity(model.filters.len());
        let mut outputs: Vec<f64> = Vec::with_capacity(model.filters.len());
        for f in &model.filters {
            let patch: Vec<f64> = f
                .input_indices
                .iter()
                .map(|&i| if ds.bits.get(row, i) { 1.0 } else { 0.0 })
                .collect();
            let mut h = f.b1.clone();
            for (hi, w1row) in h.iter_mut().zip(&f.w1) {
                for (&w, &x) in w1row.iter().zip(&patch) {
                    *hi += w * x;
                }
            }
            let mut z = f.b2;
            for (&hi, &w) in h.iter().zip(&f.w2) {
                if hi > 0.0 {
                    z += w * hi;
                }
            }
            let out = match mode {
                ActivationMode::Hard => {
                    if z >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                ActivationMode::Surrogate => z.clamp(-1.0, 1.0),
            };
            patches.push(patch);
            hiddens.push(h);
            pre_acts.push(z);
            outputs.push(out);
        }

        let scores: Vec<f64> = model
            .head
            .weights
            .iter()
            .zip(&model.head.bias)
            .map(|(wrow, &b)| {
                let mut s = b;
                for (&w, &o) in wrow.iter().zip(&outputs) {
                    s += w * o;
                }
                s
            })
            .collect();

        // loss and dL/dscore
        let mut dscore = vec![0.0; n_outputs];
        let loss = match (model.task, &ds.labels) {
            (Task::Binary, Labels::Classes(classes)) => {
                let y = classes[row] as f64;
                let s = scores[0];
                dscore[0] = sigmoid(s) - y;
                softplus(s) - y * s
            }
            (Task::Multiclass(_), Labels::Classes(classes)) => {
                let y = classes[row];
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + scores.iter().map(|&s| (s - m).exp()).sum::<f64>().ln();
                for (c, g) in dscore.iter_mut().enumerate() {
                    *g = (scores[c] - lse).exp() - if c == y { 1.0 } else { 0.0 };
                }
                lse - scores[y]
            }
            (Task::Regression, labels @ Labels::Values(_)) => {
                let target = standardized_target(labels, row, model.standardization);
                let d = scores[0] - target;
                dscore[0] = 2.0 * d;
                d * d
            }
            _ => unreachable!("task/label agreement checked before training"),
        };
        total_loss += loss;

        // backward
        for (f_idx, f) in model.filters.iter().enumerate() {
            let mut dout = 0.0;
            for (c, wrow) in model.head.weights.iter().enumerate() {
                dout += dscore[c] * wrow[f_idx];
            }
            // straight-through estimate: identity clipped to |z| <= 1
            let dz = if pre_acts[f_idx].abs() <= 1.0 {
                dout
            } else {
                0.0
            };
            let fg = &mut grads.filters[f_idx];
            fg.b2 += dz;
            for (i, (&h, &w)) in hiddens[f_idx].iter().zip(&f.w2).enumerate() {
                let a = if h > 0.0 { h } else { 0.0 };
                fg.w2[i] += dz * a;
                let dh = if h > 0.0 { dz * w } else { 0.0 };
                fg.b1[i] += dh;
                for (j, &x) in patches[f_idx].iter().enumerate() {
                    fg.w1[i][j] += dh * x;
                }
            }
        }
        for (c, wrow) in grads.head_weights.iter_mut().enumerate() {
            for (f_idx, g) in wrow.iter_mut().enumerate() {
                *g += dscore[c] * outputs[f_idx];
            }
            grads.head_bias[c] += dscore[c];
        }
    }

    let inv = 1.0 / rows.len().max(1) as f64;
    grads.scale(inv);
    (total_loss * inv, grads)
}

/// Validation metric on the higher-is-better convention: AUC for binary,
/// accuracy for multiclass, negated RMSE (original units) for regression.
pub fn validation_metric(model: &TTnetModel, ds: &BinarizedDataset) -> Result<f64> {
    let scores: Vec<Vec<f64>> = (0..ds.n_rows())
        .map(|r| model.scores_for_row(&ds.bits, r))
        .collect();
    metric_from_scores(model.task, model.standardization, &scores, &ds.labels)
}

pub fn metric_from_scores(
    task: Task,
    standardization: Option<Standardization>,
    scores: &[Vec<f64>],
    labels: &Labels,
) -> Result<f64> {
    match (task, labels) {
        (Task::Binary, Labels::Classes(classes)) => {
            let s: Vec<f64> = scores.iter().map(|v| v[0]).collect();
            auc(&s, classes)
        }
        (Task::Multiclass(_), Labels::Classes(classes)) => {
            let preds: Vec<usize> = scores
                .iter()
                .map(|v| {
                    let mut best = 0;
                    for (c, &s) in v.iter().enumerate() {
                        if s > v[best] {
                            best = c;
                        }
                    }
                    best
                })
                .collect();
            accuracy(&preds, classes)
        }
        (Task::Regression, Labels::Values(targets)) => {
            let std = standardization.unwrap_or(Standardization {
                mean: 0.0,
                std: 1.0,
            });
            let preds: Vec<f64> = scores.iter().map(|v| v[0] * std.std + std.mean).collect();
            Ok(-rmse(&preds, targets)?)
        }
        _ => Err(Error::Shape("task does not match dataset labels".into())),
    }
}

/// Training output: the best-validation parameters plus the loss trace.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: TTnetModel,
    pub epoch_losses: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_metric: f64,
}

/// Mini-batch SGD with momentum and straight-through gradients. Snapshots
/// the parameters after every epoch and returns the ones with the best
/// validation metric (the initial parameters count as epoch 0).
pub fn train(
    model: &TTnetModel,
    train_ds: &BinarizedDataset,
    val_ds: &BinarizedDataset,
    hp: &Hyperparams,
) -> Result<Trained> {
    if model.task != train_ds.task || model.task != val_ds.task {
        return Err(Error::Shape(format!(
            "task mismatch: model {:?}, train {:?}, val {:?}",
            model.task, train_ds.task, val_ds.task
        )));
    }
    if hp.batch_size == 0 {
        return Err(Error::Param("batch_size must be >= 1".into()));
    }
    if train_ds.n_rows() == 0 {
        return Err(Error::Value("training set is empty".into()));
    }

    let mut model = model.clone();
    if model.task == Task::Regression {
        if let Labels::Values(targets) = &train_ds.labels {
            model.standardization = Some(target_standardization(targets));
        }
    }

    let mut best_model = model.clone();
    let mut best_metric = validation_metric(&model, val_ds)?;
    let mut best_epoch = 0;

    let mut velocity = ModelGrads::zeros_like(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut order: Vec<usize> = (0..train_ds.n_rows()).collect();
    let mut epoch_losses = Vec::with_capacity(hp.epochs);

    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch_idx, batch) in order.chunks(hp.batch_size).enumerate() {
            let (loss, mut grads) = loss_and_grads(&model, train_ds, batch, ActivationMode::Hard);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    learning_rate: hp.learning_rate,
                });
            }
            loss_sum += loss * batch.len() as f64;

            // decoupled penalties: L2 on all weights, L1 on head weights
            for (fg, f) in grads.filters.iter_mut().zip(&model.filters) {
                for (grow, wrow) in fg.w1.iter_mut().zip(&f.w1) {
                    for (g, &w) in grow.iter_mut().zip(wrow) {
                        *g += hp.weight_decay * w;
                    }
                }
                for (g, &w) in fg.w2.iter_mut().zip(&f.w2) {
                    *g += hp.weight_decay * w;
                }
            }
            for (grow, wrow) in grads.head_weights.iter_mut().zip(&model.head.weights) {
                for (g, &w) in grow.iter_mut().zip(wrow) {
                    *g += hp.weight_decay * w;
                    *g += hp.l1_head
                        * if w > 0.0 {
                            1.0
                        } else if w < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                }
            }

            // momentum step
            for ((vf, gf), f) in velocity
                .filters
                .iter_mut()
                .zip(&grads.filters)
                .zip(&mut model.filters)
            {
                for ((vrow, grow), wrow) in vf.w1.iter_mut().zip(&gf.w1).zip(&mut f.w1) {
                    for ((v, &g), w) in vrow.iter_mut().zip(grow).zip(wrow) {
                        *v = MOMENTUM * *v + g;
                        *w -= hp.learning_rate * *v;
                    }
                }
                for ((v, &g), b) in vf.b1.iter_mut().zip(&gf.b1).zip(&mut f.b1) {
                    *v = MOMENTUM * *v + g;
                    *b -= hp.learning_rate * *v;
                }
                for ((v, &g), w) in vf.w2.iter_mut().zip(&gf.w2).zip(&mut f.w2) {
                    *v = MOMENTUM * *v + g;
                    *w -= hp.learning_rate * *v;
                }
                vf.b2 = MOMENTUM * vf.b2 + gf.b2;
                f.b2 -= hp.learning_rate * vf.b2;
            }
            for ((vrow, grow), wrow) in velocity
                .head_weights
                .iter_mut()
                .zip(&grads.head_weights)
                .zip(&mut model.head.weights)
            {
                for ((v, &g), w) in vrow.iter_mut().zip(grow).zip(wrow) {
                    *v = MOMENTUM * *v + g;
                    *w -= hp.learning_rate * *v;
                }
            }
            for ((v, &g), b) in velocity
                .head_bias
                .iter_mut()
                .zip(&grads.head_bias)
                .zip(&mut model.head.bias)
            {
                *v = MOMENTUM * *v + g;
                *b -= hp.learning_rate * *v;
            }
        }
        epoch_losses.push(loss_sum / train_ds.n_rows() as f64);

        let metric = validation_metric(&model, val_ds)?;
        if metric > best_metric {
            best_metric = metric;
            best_model = model.clone();
            best_epoch = epoch + 1;
        }
    }

    Ok(Trained {
        model: best_model,
        epoch_losses,
        best_epoch,
        best_val_metric: best_metric,
    })
}

fn ternary_sign(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Threshold one weight row at tau: sign(w) where |w| >= tau, else 0.
pub fn ternarize_row(weights: &[f64], tau: f64) -> Vec<f64> {
    weights
        .iter()
        .map(|&w| if w.abs() >= tau { ternary_sign(w) } else { 0.0 })
        .collect()
}

fn rescaled_bias(bias: f64, weights: &[f64], tern: &[f64]) -> f64 {
    let kept: Vec<f64> = weights
        .iter()
        .zip(tern)
        .filter(|(_, &t)| t != 0.0)
        .map(|(&w, _)| w.abs())
        .collect();
    if kept.is_empty() {
        bias.round()
    } else {
        let scale = kept.iter().sum::<f64>() / kept.len() as f64;
        (bias / scale).round()
    }
}

/// Quantize a float head to {-1, 0, +1} weights and an integer bias.
///
/// Each weight row's threshold tau is the smallest candidate (scanning the
/// sorted nonzero |w| values) whose ternary model degrades the evaluation
/// metric by less than 2% relative to the float model; if no candidate
/// qualifies, the best-scoring one is taken. Filters left with all-zero
/// weights are dropped.
pub fn ternarize_head(model: &TTnetModel, eval_ds: &BinarizedDataset) -> Result<TTnetModel> {
    if model.head.mode != HeadMode::Float {
        return Err(Error::Param("ternarize_head requires a float head".into()));
    }
    if model.task != eval_ds.task {
        return Err(Error::Shape(
            "task mismatch between model and dataset".into(),
        ));
    }

    // filter outputs are fixed; precompute them once
    let filter_bits: Vec<Vec<bool>> = (0..eval_ds.n_rows())
        .map(|r| model.filter_bits_for_row(&eval_ds.bits, r))
        .collect();
    let eval_head = |weights: &[Vec<f64>], bias: &[f64]| -> Result<f64> {
        let scores: Vec<Vec<f64>> = filter_bits
            .iter()
            .map(|fb| {
                weights
                    .iter()
                    .zip(bias)
                    .map(|(row, &b)| {
                        let mut s = b;
                        for (&w, &o) in row.iter().zip(fb) {
                            s += w * if o { 1.0 } else { 0.0 };
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        metric_from_scores(model.task, model.standardization, &scores, &eval_ds.labels)
    };

    let baseline = eval_head(&model.head.weights, &model.head.bias)?;
    let n_rows = model.head.weights.len();
    let row_candidates: Vec<Vec<f64>> = model
        .head
        .weights
        .iter()
        .map(|row| {
            let mut c: Vec<f64> = row.iter().map(|w| w.abs()).filter(|&a| a > 0.0).collect();
            c.sort_by(|a, b| a.partial_cmp(b).unwrap());
            c.dedup();
            c
        })
        .collect();

    if row_candidates.iter().all(|c| c.is_empty()) {
        return Err(Error::AllWeightsZeroed {
            trace: "float head holds no nonzero weight".into(),
        });
    }

    // build a trial head: chosen rows use their tau, unscanned rows keep
    // every nonzero weight (their smallest candidate)
    let trial_tau = |chosen: &[Option<f64>]| -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut weights = Vec::with_capacity(n_rows);
        let mut bias = Vec::with_capacity(n_rows);
        for c in 0..n_rows {
            let tau = chosen[c]
                .or_else(|| row_candidates[c].first().copied())
                .unwrap_or(f64::INFINITY);
            let tern = ternarize_row(&model.head.weights[c], tau);
            bias.push(rescaled_bias(
                model.head.bias[c],
                &model.head.weights[c],
                &tern,
            ));
            weights.push(tern);
        }
        (weights, bias)
    };

    let mut chosen: Vec<Option<f64>> = vec![None; n_rows];
    let mut trace = String::new();
    for c in 0..n_rows {
        if row_candidates[c].is_empty() {
            chosen[c] = Some(f64::INFINITY);
            continue;
        }
        let mut best: Option<(f64, f64)> = None; // (metric, tau)
        let mut accepted = None;
        for &tau in &row_candidates[c] {
            let mut attempt = chosen.clone();
            attempt[c] = Some(tau);
            let (w, b) = trial_tau(&attempt);
            let metric = eval_head(&w, &b)?;
            trace.push_str(&format!("row {c}: tau={tau} metric={metric:.6}; "));
            if baseline - metric < 0.02 * baseline.abs() + 1e-12 {
                accepted = Some(tau);
                break;
            }
            if best.is_none_or(|(m, _)| metric > m) {
                best = Some((metric, tau));
            }
        }
        chosen[c] = Some(accepted.unwrap_or_else(|| best.expect("candidates nonempty").1));
    }

    let (weights, bias) = trial_tau(&chosen);
    if weights.iter().flatten().all(|&w| w == 0.0) {
        return Err(Error::AllWeightsZeroed { trace });
    }

    let ternarized = TTnetModel {
        filters: model.filters.clone(),
        head: crate::net::model::LinearHead {
            mode: HeadMode::Ternary,
            weights,
            bias,
        },
        input_bits: model.input_bits,
        task: model.task,
        standardization: model.standardization,
    };
    let pruned = drop_zero_weight_filters(&ternarized);
    pruned.validate()?;
    Ok(pruned)
}
