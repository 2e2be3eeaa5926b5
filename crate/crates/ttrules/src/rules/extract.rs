use rayon::prelude::*;

use crate::data::BinarizerMap;
use crate::error::{Error, Result};
use crate::net::TTnetModel;
use crate::rules::qm::minimize_qm;
use crate::rules::truth_table::{enumerate_truth_table, inject_dont_cares, DontCareFlags};
use crate::ruleset::{Rule, RuleSet};

/// Extract one minimized rule per filter with a nonzero head weight:
/// enumerate the truth table, inject don't-cares, minimize, attach the
/// head weights. Filters are processed independently (in parallel) and
/// merged in filter order.
pub fn extract_rules(
    model: &TTnetModel,
    map: &BinarizerMap,
    support: &[Vec<u32>],
    flags: DontCareFlags,
) -> Result<RuleSet> {
    if map.total_bits != model.input_bits {
        return Err(Error::Shape(format!(
            "binarizer map covers {} bits, model reads {}",
            map.total_bits, model.input_bits
        )));
    }
    if support.len() != model.filters.len() {
        return Err(Error::Shape(format!(
            "support for {} filters, model has {}",
            support.len(),
            model.filters.len()
        )));
    }

    let kept: Vec<usize> = (0..model.filters.len())
        .filter(|&f| model.head.weights.iter().any(|row| row[f] != 0.0))
        .collect();

    let rules: Vec<Rule> = kept
        .par_iter()
        .map(|&f| -> Result<Rule> {
            let table = enumerate_truth_table(model, f)?;
            let table = inject_dont_cares(&table, map, &support[f], flags);
            let formula = minimize_qm(&table);
            debug_assert!(formula.agrees_with(&table));
            Ok(Rule {
                name: table.origin.clone(),
                formula,
                weights: model.head.weights.iter().map(|row| row[f]).collect(),
            })
        })
        .collect::<Result<_>>()?;

    Ok(RuleSet {
        rules,
        bias: model.head.bias.clone(),
        task: model.task,
        map: map.clone(),
        standardization: model.standardization,
    })
}
