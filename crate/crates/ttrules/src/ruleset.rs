//! The extracted rule model: weighted DNF rules summed against a bias,
//! with the same decision rule as the source network, plus the rule-set
//! optimization passes and network-agreement verification.

use serde::{Deserialize, Serialize};

use crate::data::{BinarizedDataset, BinarizerMap, Task};
use crate::error::{Error, Result};
use crate::net::{decide, Prediction, Standardization, TTnetModel};
use crate::rules::DnfFormula;

/// One rule: a DNF formula over named input bits and one weight per
/// output. Firing contributes the weight, not firing contributes zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    pub formula: DnfFormula,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn fires(&self, input: &[bool]) -> bool {
        self.formula.eval_bits(input)
    }

    /// Per-output contribution: `weights[c]` if the formula fires, else 0.
    pub fn contribution(&self, input: &[bool]) -> Vec<f64> {
        if self.fires(input) {
            self.weights.clone()
        } else {
            vec![0.0; self.weights.len()]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    pub bias: Vec<f64>,
    pub task: Task,
    pub map: BinarizerMap,
    pub standardization: Option<Standardization>,
}

impl RuleSet {
    pub fn n_outputs(&self) -> usize {
        self.bias.len()
    }

    /// Raw per-output scores: bias plus fired weights, summed in rule
    /// order (regression scores stay in standardized space).
    pub fn scores(&self, input: &[bool]) -> Vec<f64> {
        let mut scores = self.bias.clone();
        for rule in &self.rules {
            if rule.fires(input) {
                for (s, &w) in scores.iter_mut().zip(&rule.weights) {
                    *s += w;
                }
            }
        }
        scores
    }

    /// Binary: class 1 iff the score sum is > 0. Multiclass: argmax with
    /// ties to the lowest class. Regression: un-standardized sum.
    pub fn predict(&self, input: &[bool]) -> Prediction {
        decide(self.task, &self.scores(input), self.standardization)
    }

    /// One line per rule: weight, then the fired conditions by bit name.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            let weight = rule
                .weights
                .iter()
                .map(|&w| {
                    if w == w.round() && w.abs() < 1e6 {
                        format!("{:+}", w as i64)
                    } else {
                        format!("{w:+.4}")
                    }
                })
                .collect::<Vec<_>>()
                .join(",");
            let body = self.formula_text(&rule.formula);
            out.push_str(&format!("({weight}) IF {body}\n"));
        }
        out
    }

    fn formula_text(&self, formula: &DnfFormula) -> String {
        if formula.cubes.is_empty() {
            return "FALSE".into();
        }
        let cube_texts: Vec<String> = formula
            .cubes
            .iter()
            .map(|cube| {
                let lits = cube.literals(formula.k);
                if lits.is_empty() {
                    return "TRUE".into();
                }
                lits.iter()
                    .map(|&(var, positive)| {
                        let name = &self.map.bit_names[formula.input_indices[var]];
                        if positive {
                            name.clone()
                        } else {
                            format!("NOT({name})")
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(" AND ")
            })
            .collect();
        if cube_texts.len() == 1 {
            cube_texts.into_iter().next().unwrap()
        } else {
            cube_texts
                .into_iter()
                .map(|c| format!("({c})"))
                .collect::<Vec<_>>()
                .join(" OR ")
        }
    }
}

/// Rule counts after each optimization pass, plus the train agreement of
/// the lossy correlation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub initial_rules: usize,
    pub after_constant_fold: usize,
    pub after_exact_merge: usize,
    pub after_complement_merge: usize,
    pub after_correlation_prune: usize,
    pub corr_threshold: f64,
    /// Fraction of training rows predicted identically before and after
    /// the correlation step.
    pub train_agreement: Option<f64>,
}

/// Truth vector of a formula re-expressed over its sorted index set, so
/// semantically equal formulas compare equal regardless of local variable
/// order.
fn canonical_function(formula: &DnfFormula) -> (Vec<usize>, Vec<bool>) {
    let mut sorted: Vec<usize> = formula.input_indices.clone();
    sorted.sort_unstable();
    let position: Vec<usize> = formula
        .input_indices
        .iter()
        .map(|g| sorted.iter().position(|s| s == g).unwrap())
        .collect();
    let truth = (0..1u32 << formula.k)
        .map(|sorted_code| {
            let mut code = 0u16;
            for (local, &pos) in position.iter().enumerate() {
                if (sorted_code >> pos) & 1 == 1 {
                    code |= 1 << local;
                }
            }
            formula.eval_code(code)
        })
        .collect();
    (sorted, truth)
}

/// Do two formulas compute the same (or complementary) global function?
/// Checked exhaustively over the union of their supports.
fn semantic_relation(a: &DnfFormula, b: &DnfFormula) -> Option<bool> {
    let mut union: Vec<usize> = a
        .input_indices
        .iter()
        .chain(&b.input_indices)
        .copied()
        .collect();
    union.sort_unstable();
    union.dedup();
    if union.len() > 20 {
        return None;
    }
    let mut identical = true;
    let mut opposite = true;
    let mut input = vec![false; union.iter().copied().max().map_or(0, |m| m + 1)];
    for code in 0..1u64 << union.len() {
        for (j, &g) in union.iter().enumerate() {
            input[g] = (code >> j) & 1 == 1;
        }
        let (va, vb) = (a.eval_bits(&input), b.eval_bits(&input));
        identical &= va == vb;
        opposite &= va != vb;
        if !identical && !opposite {
            return None;
        }
    }
    if identical {
        Some(true)
    } else if opposite {
        Some(false)
    } else {
        None
    }
}

fn weight_norm(weights: &[f64]) -> f64 {
    weights.iter().map(|w| w * w).sum::<f64>().sqrt()
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        None
    } else {
        Some(cov / (va.sqrt() * vb.sqrt()))
    }
}

/// Optimize a rule set in four ordered passes:
///
/// 1. constant folding (decided on the formula, not data),
/// 2. exact merge of identical formulas (weights summed),
/// 3. complement merge via w(1-f) = w - wf,
/// 4. correlation pruning of redundant rules on the training data.
///
/// Passes 1-3 preserve scores on every possible input. Pass 4 at the
/// default threshold 1.0 merges only rules whose firing vectors coincide
/// on the training data AND whose formulas are semantically
/// identical/opposite, so it is score-preserving too; thresholds below 1
/// are lossy and reported.
pub fn optimize_ruleset(
    ruleset: &RuleSet,
    train: &BinarizedDataset,
    corr_threshold: f64,
) -> Result<(RuleSet, OptimizationReport)> {
    if !(corr_threshold > 0.0 && corr_threshold <= 1.0) {
        return Err(Error::Param(format!(
            "corr_threshold must be in (0, 1], got {corr_threshold}"
        )));
    }
    if train.n_rows() == 0 {
        return Err(Error::Value(
            "optimization needs a non-empty training set".into(),
        ));
    }

    let n_outputs = ruleset.n_outputs();
    let mut bias = ruleset.bias.clone();
    let initial_rules = ruleset.rules.len();

    // pass 1: constant folding
    let mut rules: Vec<Rule> = Vec::with_capacity(ruleset.rules.len());
    for rule in &ruleset.rules {
        match rule.formula.as_constant() {
            Some(true) => {
                for (b, &w) in bias.iter_mut().zip(&rule.weights) {
                    *b += w;
                }
            }
            Some(false) => {}
            None => rules.push(rule.clone()),
        }
    }
    let after_constant_fold = rules.len();

    // pass 2: exact merge on the canonical function
    let canon: Vec<(Vec<usize>, Vec<bool>)> = rules
        .iter()
        .map(|r| canonical_function(&r.formula))
        .collect();
    let mut merged: Vec<Option<Rule>> = rules.iter().cloned().map(Some).collect();
    for i in 0..merged.len() {
        if merged[i].is_none() {
            continue;
        }
        for j in i + 1..merged.len() {
            if merged[j].is_none() || canon[i] != canon[j] {
                continue;
            }
            let donor = merged[j].take().unwrap();
            let survivor = merged[i].as_mut().unwrap();
            for (w, &d) in survivor.weights.iter_mut().zip(&donor.weights) {
                *w += d;
            }
        }
    }
    let mut rules: Vec<Rule> = merged
        .into_iter()
        .flatten()
        .filter(|r| r.weights.iter().any(|&w| w != 0.0))
        .collect();
    let after_exact_merge = rules.len();

    // pass 3: complement merge, folding w(1-f) into bias + (-w)f
    let canon: Vec<(Vec<usize>, Vec<bool>)> = rules
        .iter()
        .map(|r| canonical_function(&r.formula))
        .collect();
    let mut merged: Vec<Option<Rule>> = rules.drain(..).map(Some).collect();
    for i in 0..merged.len() {
        if merged[i].is_none() {
            continue;
        }
        for j in i + 1..merged.len() {
            if merged[j].is_none() {
                continue;
            }
            let complementary =
                canon[i].0 == canon[j].0 && canon[i].1.iter().zip(&canon[j].1).all(|(a, b)| a != b);
            if !complementary {
                continue;
            }
            let donor = merged[j].take().unwrap();
            let survivor = merged[i].as_mut().unwrap();
            for ((w, b), &d) in survivor
                .weights
                .iter_mut()
                .zip(&mut bias)
                .zip(&donor.weights)
            {
                *b += d;
                *w -= d;
            }
        }
    }
    let mut rules: Vec<Rule> = merged
        .into_iter()
        .flatten()
        .filter(|r| r.weights.iter().any(|&w| w != 0.0))
        .collect();
    let after_complement_merge = rules.len();

    // snapshot for the train-agreement figure of pass 4
    let before_pass4 = RuleSet {
        rules: rules.clone(),
        bias: bias.clone(),
        task: ruleset.task,
        map: ruleset.map.clone(),
        standardization: ruleset.standardization,
    };

    // pass 4: correlation pruning on the training firing vectors
    let firing: Vec<Vec<bool>> = rules
        .iter()
        .map(|r| {
            (0..train.n_rows())
                .map(|row| r.fires(&train.bits.row_bits(row)))
                .collect()
        })
        .collect();
    // vector hashes make the all-pairs identity scan cheap
    let hash_of = |v: &[bool]| -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        v.hash(&mut h);
        h.finish()
    };
    let fire_hash: Vec<u64> = firing.iter().map(|f| hash_of(f)).collect();
    let flip_hash: Vec<u64> = firing
        .iter()
        .map(|f| {
            let neg: Vec<bool> = f.iter().map(|&b| !b).collect();
            hash_of(&neg)
        })
        .collect();
    let mut alive: Vec<bool> = vec![true; rules.len()];
    let mut pruned_any = false;
    for i in 0..rules.len() {
        if !alive[i] {
            continue;
        }
        for j in i + 1..rules.len() {
            if !alive[i] || !alive[j] {
                continue;
            }
            if corr_threshold >= 1.0 {
                if fire_hash[i] != fire_hash[j] && fire_hash[i] != flip_hash[j] {
                    continue;
                }
                let identical = firing[i] == firing[j];
                let opposite = !identical && firing[i].iter().zip(&firing[j]).all(|(a, b)| a != b);
                if !identical && !opposite {
                    continue;
                }
                // the train data only pre-filters: merge just when the
                // formulas agree as functions, keeping pass 4 lossless
                match semantic_relation(&rules[i].formula, &rules[j].formula) {
                    Some(true) => {
                        let (survivor, donor) = pick_survivor(&rules, i, j);
                        let dw: Vec<f64> = rules[donor].weights.clone();
                        for (w, d) in rules[survivor].weights.iter_mut().zip(dw) {
                            *w += d;
                        }
                        alive[donor] = false;
                        pruned_any = true;
                    }
                    Some(false) => {
                        // f_j = 1 - f_i: absorb the donor into bias
                        let (survivor, donor) = pick_survivor(&rules, i, j);
                        let dw: Vec<f64> = rules[donor].weights.clone();
                        for ((w, b), d) in rules[survivor].weights.iter_mut().zip(&mut bias).zip(dw)
                        {
                            *b += d;
                            *w -= d;
                        }
                        alive[donor] = false;
                        pruned_any = true;
                    }
                    None => {}
                }
            } else {
                let fi: Vec<f64> = firing[i].iter().map(|&b| f64::from(b as u8)).collect();
                let fj: Vec<f64> = firing[j].iter().map(|&b| f64::from(b as u8)).collect();
                let rho = match pearson(&fi, &fj) {
                    Some(r) => r,
                    None => continue,
                };
                if rho.abs() < corr_threshold {
                    continue;
                }
                let (survivor, donor) = pick_survivor(&rules, i, j);
                // least squares of the combined contribution on the
                // survivor's firing vector plus an intercept
                let fs = &firing[survivor];
                let n = fs.len() as f64;
                let s_f: f64 = fs.iter().filter(|&&b| b).count() as f64;
                let denom = n * s_f - s_f * s_f; // sum f^2 = sum f for 0/1
                if denom == 0.0 {
                    continue;
                }
                let dw: Vec<f64> = rules[donor].weights.clone();
                let sw: Vec<f64> = rules[survivor].weights.clone();
                for c in 0..n_outputs {
                    let mut s_c = 0.0;
                    let mut s_fc = 0.0;
                    for row in 0..fs.len() {
                        let contrib = sw[c] * f64::from(firing[survivor][row] as u8)
                            + dw[c] * f64::from(firing[donor][row] as u8);
                        s_c += contrib;
                        if fs[row] {
                            s_fc += contrib;
                        }
                    }
                    let alpha = (n * s_fc - s_f * s_c) / denom;
                    let beta = (s_c - alpha * s_f) / n;
                    rules[survivor].weights[c] = alpha;
                    bias[c] += beta;
                }
                alive[donor] = false;
                pruned_any = true;
            }
        }
    }
    let rules: Vec<Rule> = rules
        .into_iter()
        .zip(&alive)
        .filter(|(r, &a)| a && r.weights.iter().any(|&w| w != 0.0))
        .map(|(r, _)| r)
        .collect();

    let optimized = RuleSet {
        rules,
        bias,
        task: ruleset.task,
        map: ruleset.map.clone(),
        standardization: ruleset.standardization,
    };
    let after_correlation_prune = optimized.rules.len();

    let train_agreement = if pruned_any {
        let mut agree = 0usize;
        for row in 0..train.n_rows() {
            let input = train.bits.row_bits(row);
            if predictions_match(&before_pass4.predict(&input), &optimized.predict(&input)) {
                agree += 1;
            }
        }
        Some(agree as f64 / train.n_rows() as f64)
    } else {
        None
    };

    Ok((
        optimized,
        OptimizationReport {
            initial_rules,
            after_constant_fold,
            after_exact_merge,
            after_complement_merge,
            after_correlation_prune,
            corr_threshold,
            train_agreement,
        },
    ))
}

fn pick_survivor(rules: &[Rule], i: usize, j: usize) -> (usize, usize) {
    let (ni, nj) = (
        weight_norm(&rules[i].weights),
        weight_norm(&rules[j].weights),
    );
    if nj > ni {
        (j, i)
    } else {
        (i, j)
    }
}

fn predictions_match(a: &Prediction, b: &Prediction) -> bool {
    match (a, b) {
        (Prediction::Class(x), Prediction::Class(y)) => x == y,
        (Prediction::Value(x), Prediction::Value(y)) => (x - y).abs() <= 1e-9,
        _ => false,
    }
}

/// Network-agreement figures for a rule set on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n_rows: usize,
    pub agreement: f64,
    pub max_score_diff: f64,
    pub zero_rows: bool,
    pub first_mismatch_row: Option<usize>,
    pub offending_rule: Option<String>,
}

/// Compare rule-set predictions and scores against the source network on
/// every row. With don't-care injection limited to encoding constraints
/// and only the lossless optimization passes, agreement must be exact.
pub fn verify_exactness(
    ruleset: &RuleSet,
    model: &TTnetModel,
    ds: &BinarizedDataset,
) -> Result<AgreementReport> {
    if ruleset.map.total_bits != model.input_bits || ds.total_bits() != model.input_bits {
        return Err(Error::Shape(format!(
            "bit widths disagree: ruleset {}, model {}, data {}",
            ruleset.map.total_bits,
            model.input_bits,
            ds.total_bits()
        )));
    }
    if ruleset.n_outputs() != model.head.n_outputs() {
        return Err(Error::Shape("output counts disagree".into()));
    }

    if ds.n_rows() == 0 {
        return Ok(AgreementReport {
            n_rows: 0,
            agreement: 1.0,
            max_score_diff: 0.0,
            zero_rows: true,
            first_mismatch_row: None,
            offending_rule: None,
        });
    }

    let mut agree = 0usize;
    let mut max_diff = 0.0f64;
    let mut first_mismatch_row = None;
    let mut offending_rule = None;
    for row in 0..ds.n_rows() {
        let input = ds.bits.row_bits(row);
        let net_scores = model.forward(&input)?;
        let rule_scores = ruleset.scores(&input);
        for (a, b) in net_scores.iter().zip(&rule_scores) {
            max_diff = max_diff.max((a - b).abs());
        }
        let net_pred = model.decide(&net_scores);
        let rule_pred = decide(ruleset.task, &rule_scores, ruleset.standardization);
        if predictions_match(&net_pred, &rule_pred) {
            agree += 1;
        } else if first_mismatch_row.is_none() {
            first_mismatch_row = Some(row);
            offending_rule = find_offending_rule(ruleset, model, &input);
        }
    }

    Ok(AgreementReport {
        n_rows: ds.n_rows(),
        agreement: agree as f64 / ds.n_rows() as f64,
        max_score_diff: max_diff,
        zero_rows: false,
        first_mismatch_row,
        offending_rule,
    })
}

/// On a mismatching input, name the first rule whose formula disagrees
/// with its source filter (meaningful for freshly extracted sets, where
/// names still map to filters).
fn find_offending_rule(ruleset: &RuleSet, model: &TTnetModel, input: &[bool]) -> Option<String> {
    for rule in &ruleset.rules {
        let idx: usize = rule.name.strip_prefix('f').and_then(|s| s.parse().ok())?;
        let filter = model.filters.get(idx)?;
        let patch: Vec<bool> = filter.input_indices.iter().map(|&i| input[i]).collect();
        if filter.forward_bits(&patch) != rule.fires(input) {
            return Some(rule.name.clone());
        }
    }
    None
}
