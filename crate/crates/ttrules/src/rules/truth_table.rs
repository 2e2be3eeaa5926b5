use serde::{Deserialize, Serialize};

use crate::data::{BinarizerMap, BitRole};
use crate::error::{Error, Result};
use crate::net::{TTnetModel, MAX_FAN_IN};

/// Complete 2^k listing of one filter, with a don't-care mask. Row r
/// encodes the patch with bit j of r holding the value of input j.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthTable {
    pub k: usize,
    pub input_indices: Vec<usize>,
    pub outputs: Vec<bool>,
    pub dont_care: Vec<bool>,
    pub origin: String,
}

impl TruthTable {
    pub fn n_rows(&self) -> usize {
        1 << self.k
    }

    pub fn on_set(&self) -> Vec<u16> {
        (0..self.n_rows() as u16)
            .filter(|&r| self.outputs[r as usize] && !self.dont_care[r as usize])
            .collect()
    }
}

/// Exhaustively tabulate one filter. Refused above the fan-in bound where
/// the table stops being cheap.
pub fn enumerate_truth_table(model: &TTnetModel, filter_id: usize) -> Result<TruthTable> {
    let filter = model
        .filters
        .get(filter_id)
        .ok_or_else(|| Error::Param(format!("no filter {filter_id}")))?;
    let k = filter.fan_in();
    if k > MAX_FAN_IN {
        return Err(Error::Param(format!(
            "fan-in {k} exceeds the enumeration bound {MAX_FAN_IN}"
        )));
    }
    let outputs = (0..1u32 << k)
        .map(|r| filter.forward_code(r as u16))
        .collect();
    Ok(TruthTable {
        k,
        input_indices: filter.input_indices.clone(),
        outputs,
        dont_care: vec![false; 1 << k],
        origin: format!("f{filter_id:04}"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DontCareFlags {
    /// Also mark patches never seen in the training support. Off by
    /// default: it trades universal exactness for exactness on observed
    /// support only.
    pub unseen_patterns: bool,
}

/// Mark rows that no encodable input can produce (thermometer monotonicity
/// and one-hot exclusivity), plus optionally rows with zero training
/// support. Outputs are kept but ignored downstream.
pub fn inject_dont_cares(
    table: &TruthTable,
    map: &BinarizerMap,
    support: &[u32],
    flags: DontCareFlags,
) -> TruthTable {
    let origins = map.bit_origins();
    let locals: Vec<_> = table.input_indices.iter().map(|&g| origins[g]).collect();

    // pairs (lo, hi) of local variables where hi set forces lo set
    let mut thermo_pairs: Vec<(usize, usize)> = Vec::new();
    for (a, oa) in locals.iter().enumerate() {
        for (b, ob) in locals.iter().enumerate() {
            if a == b || oa.feature != ob.feature {
                continue;
            }
            if let (BitRole::Thermometer { rank: ra }, BitRole::Thermometer { rank: rb }) =
                (oa.role, ob.role)
            {
                if ra < rb {
                    thermo_pairs.push((a, b));
                }
            }
        }
    }

    // one-hot groups present in this table: (local vars, full group size)
    let mut onehot_groups: Vec<(Vec<usize>, usize)> = Vec::new();
    for (a, oa) in locals.iter().enumerate() {
        if let BitRole::OneHot { group_size } = oa.role {
            if let Some((vars, _)) = onehot_groups
                .iter_mut()
                .find(|(vars, _)| locals[vars[0]].feature == oa.feature)
            {
                vars.push(a);
            } else {
                onehot_groups.push((vec![a], group_size));
            }
        }
    }

    let mut dont_care = table.dont_care.clone();
    for r in 0..table.n_rows() as u16 {
        let bit = |v: usize| (r >> v) & 1 == 1;
        let mut impossible = thermo_pairs.iter().any(|&(lo, hi)| bit(hi) && !bit(lo));
        if !impossible {
            impossible = onehot_groups.iter().any(|(vars, group_size)| {
                let set = vars.iter().filter(|&&v| bit(v)).count();
                set >= 2 || (set == 0 && vars.len() == *group_size)
            });
        }
        if !impossible && flags.unseen_patterns {
            impossible = support[r as usize] == 0;
        }
        if impossible {
            dont_care[r as usize] = true;
        }
    }
    TruthTable {
        dont_care,
        ..table.clone()
    }
}
