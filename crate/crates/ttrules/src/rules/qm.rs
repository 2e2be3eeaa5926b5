use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rules::truth_table::TruthTable;

/// Conjunction of literals over the local variables 0..k. `care` bit j set
/// means variable j is fixed to bit j of `value`; clear means free. A cube
/// covers 2^(free) rows and is never empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cube {
    value: u16,
    care: u16,
}

impl Cube {
    pub fn new(value: u16, care: u16) -> Self {
        debug_assert_eq!(value & !care, 0, "free positions must read 0");
        Cube { value, care }
    }

    pub fn minterm(row: u16) -> Self {
        Cube {
            value: row,
            care: u16::MAX,
        }
    }

    /// All-free cube (constant true over its table).
    pub fn tautology() -> Self {
        Cube { value: 0, care: 0 }
    }

    #[inline]
    pub fn covers(&self, row: u16) -> bool {
        (row & self.care) == self.value
    }

    pub fn n_fixed(&self, k: usize) -> usize {
        (self.care & low_mask(k)).count_ones() as usize
    }

    /// Characters '0', '1', '-' with local variable 0 first.
    pub fn to_pattern(&self, k: usize) -> String {
        (0..k)
            .map(|j| {
                if (self.care >> j) & 1 == 0 {
                    '-'
                } else if (self.value >> j) & 1 == 1 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }

    pub fn from_pattern(pattern: &str) -> Result<Self> {
        if pattern.len() > 16 {
            return Err(Error::Value(format!("cube pattern '{pattern}' too long")));
        }
        let mut value = 0u16;
        let mut care = 0u16;
        for (j, ch) in pattern.chars().enumerate() {
            match ch {
                '-' => {}
                '0' => care |= 1 << j,
                '1' => {
                    care |= 1 << j;
                    value |= 1 << j;
                }
                other => {
                    return Err(Error::Value(format!(
                        "cube pattern '{pattern}' holds '{other}'"
                    )))
                }
            }
        }
        Ok(Cube { value, care })
    }

    /// (variable, required value) pairs in variable order.
    pub fn literals(&self, k: usize) -> Vec<(usize, bool)> {
        (0..k)
            .filter(|j| (self.care >> j) & 1 == 1)
            .map(|j| (j, (self.value >> j) & 1 == 1))
            .collect()
    }
}

fn low_mask(k: usize) -> u16 {
    if k >= 16 {
        u16::MAX
    } else {
        (1u16 << k) - 1
    }
}

/// Disjunction of cubes over k local variables mapped to global input
/// bits. Serializes cubes as '0'/'1'/'-' patterns of width k, local
/// variable 0 first.
#[derive(Debug, Clone, PartialEq)]
pub struct DnfFormula {
    pub k: usize,
    pub input_indices: Vec<usize>,
    pub cubes: Vec<Cube>,
}

#[derive(Serialize, Deserialize)]
struct DnfRepr {
    k: usize,
    input_indices: Vec<usize>,
    cubes: Vec<String>,
}

impl Serialize for DnfFormula {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        DnfRepr {
            k: self.k,
            input_indices: self.input_indices.clone(),
            cubes: self.cubes.iter().map(|c| c.to_pattern(self.k)).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for DnfFormula {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = DnfRepr::deserialize(de)?;
        if repr.input_indices.len() != repr.k {
            return Err(serde::de::Error::custom("index list does not match k"));
        }
        let cubes = repr
            .cubes
            .iter()
            .map(|s| {
                if s.len() != repr.k {
                    return Err(serde::de::Error::custom(format!(
                        "cube '{s}' is not {} characters wide",
                        repr.k
                    )));
                }
                Cube::from_pattern(s).map_err(serde::de::Error::custom)
            })
            .collect::<std::result::Result<_, _>>()?;
        Ok(DnfFormula {
            k: repr.k,
            input_indices: repr.input_indices,
            cubes,
        })
    }
}

impl DnfFormula {
    /// Evaluate on a local patch code.
    pub fn eval_code(&self, code: u16) -> bool {
        self.cubes.iter().any(|c| c.covers(code))
    }

    /// Evaluate on a full-width input, gathering the indexed bits.
    pub fn eval_bits(&self, input: &[bool]) -> bool {
        let mut code = 0u16;
        for (j, &g) in self.input_indices.iter().enumerate() {
            if input[g] {
                code |= 1 << j;
            }
        }
        self.eval_code(code)
    }

    /// Constant over the full 2^k domain? Returns Some(true/false) for
    /// tautology/contradiction, None otherwise. Decided on the formula
    /// alone.
    pub fn as_constant(&self) -> Option<bool> {
        if self.cubes.is_empty() {
            return Some(false);
        }
        if (0..1u32 << self.k).all(|r| self.eval_code(r as u16)) {
            return Some(true);
        }
        None
    }

    /// Exhaustive truth vector over the 2^k patch domain.
    pub fn truth_vector(&self) -> Vec<bool> {
        (0..1u32 << self.k)
            .map(|r| self.eval_code(r as u16))
            .collect()
    }

    /// Agreement with a source table on every non-don't-care row.
    pub fn agrees_with(&self, table: &TruthTable) -> bool {
        (0..table.n_rows() as u16)
            .all(|r| table.dont_care[r as usize] || self.eval_code(r) == table.outputs[r as usize])
    }
}

/// Quine-McCluskey two-level minimization: prime implicants over the
/// on-set plus don't-cares, then a cover of the on-set taking essential
/// primes first and filling greedily (largest cover, ties to the smallest
/// covered row). Exact on every non-don't-care row.
pub fn minimize_qm(table: &TruthTable) -> DnfFormula {
    assert!(table.k <= 16, "fan-in beyond the enumeration bound");
    let on_rows = table.on_set();
    let care_rows: Vec<u16> = (0..table.n_rows() as u16)
        .filter(|&r| table.outputs[r as usize] || table.dont_care[r as usize])
        .collect();

    let mut formula = DnfFormula {
        k: table.k,
        input_indices: table.input_indices.clone(),
        cubes: Vec::new(),
    };
    if on_rows.is_empty() {
        return formula;
    }

    // prime generation: repeatedly combine implicants differing in one bit
    let mut primes: BTreeSet<Cube> = BTreeSet::new();
    let mut current: BTreeSet<Cube> = care_rows.iter().map(|&r| Cube::minterm(r)).collect();
    while !current.is_empty() {
        let mut next: BTreeSet<Cube> = BTreeSet::new();
        let mut combined: BTreeSet<Cube> = BTreeSet::new();
        let mut by_care: BTreeMap<u16, BTreeSet<u16>> = BTreeMap::new();
        for cube in &current {
            by_care.entry(cube.care).or_default().insert(cube.value);
        }
        for (&care, values) in &by_care {
            for &value in values {
                for j in 0..table.k {
                    let bit = 1u16 << j;
                    if care & bit == 0 {
                        continue;
                    }
                    let partner = value ^ bit;
                    if value < partner && values.contains(&partner) {
                        next.insert(Cube::new(value & !bit, care & !bit));
                        combined.insert(Cube::new(value, care));
                        combined.insert(Cube::new(partner, care));
                    }
                }
            }
        }
        for cube in current {
            if !combined.contains(&cube) {
                primes.insert(cube);
            }
        }
        current = next;
    }

    // restrict the care masks to the table width (minterms carry care bits
    // above k that no combination step can clear)
    let mask = low_mask(table.k);
    let primes: Vec<Cube> = {
        let set: BTreeSet<Cube> = primes
            .into_iter()
            .map(|c| Cube::new(c.value, c.care & mask))
            .collect();
        set.into_iter().collect()
    };

    // cover the on-set
    let coverage: Vec<Vec<u16>> = primes
        .iter()
        .map(|p| on_rows.iter().copied().filter(|&r| p.covers(r)).collect())
        .collect();

    let mut chosen: Vec<usize> = Vec::new();
    let mut covered: BTreeSet<u16> = BTreeSet::new();
    for &row in &on_rows {
        let holders: Vec<usize> = (0..primes.len())
            .filter(|&p| coverage[p].contains(&row))
            .collect();
        if holders.len() == 1 && !chosen.contains(&holders[0]) {
            chosen.push(holders[0]);
            covered.extend(&coverage[holders[0]]);
        }
    }
    while covered.len() < on_rows.len() {
        let mut best: Option<(usize, usize, u16)> = None; // (prime, gain, min new row)
        for (p, rows) in coverage.iter().enumerate() {
            if chosen.contains(&p) {
                continue;
            }
            let new_rows: Vec<u16> = rows
                .iter()
                .copied()
                .filter(|r| !covered.contains(r))
                .collect();
            if new_rows.is_empty() {
                continue;
            }
            let candidate = (p, new_rows.len(), new_rows[0]);
            best = Some(match best {
                None => candidate,
                Some(b) => {
                    if candidate.1 > b.1 || (candidate.1 == b.1 && candidate.2 < b.2) {
                        candidate
                    } else {
                        b
                    }
                }
            });
        }
        let (p, _, _) = best.expect("primes cover every on row");
        chosen.push(p);
        covered.extend(&coverage[p]);
    }

    formula.cubes = chosen.into_iter().map(|p| primes[p]).collect();
    debug_assert!(formula.agrees_with(table));
    formula
}
