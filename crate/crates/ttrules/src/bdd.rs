//! Reduced ordered binary decision diagrams for the extracted rules: a
//! hash-consed node store where reference equality is function equality,
//! plus DOT export in the solid/hollow edge convention.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU32, Ordering};

use crate::data::BinarizerMap;
use crate::error::{Error, Result};
use crate::rules::{DnfFormula, TruthTable};
use crate::ruleset::RuleSet;

static NEXT_STORE_ID: AtomicU32 = AtomicU32::new(1);

const TERMINAL_LEVEL: u32 = u32::MAX;

/// Node handle. Only meaningful with the store that produced it; two
/// handles from the same store are equal iff the functions are equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    store: u32,
    idx: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Node {
    level: u32,
    low: NodeRef,
    high: NodeRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    And,
    Or,
    Xor,
}

/// Shared ROBDD store under one fixed variable order.
#[derive(Debug)]
pub struct BddStore {
    id: u32,
    nodes: Vec<Node>,
    unique: HashMap<(u32, NodeRef, NodeRef), NodeRef>,
    apply_cache: HashMap<(Op, NodeRef, NodeRef), NodeRef>,
    /// level -> (global bit index, display name)
    order: Vec<(usize, String)>,
    level_by_bit: HashMap<usize, u32>,
}

impl BddStore {
    /// A store over the given variables, ordered as listed (level 0
    /// first). Global bit indices must be distinct.
    pub fn new(order: Vec<(usize, String)>) -> Result<Self> {
        let mut level_by_bit = HashMap::new();
        for (level, (bit, _)) in order.iter().enumerate() {
            if level_by_bit.insert(*bit, level as u32).is_some() {
                return Err(Error::Order(format!("bit {bit} listed twice in the order")));
            }
        }
        let id = NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed);
        let false_ref = NodeRef { store: id, idx: 0 };
        let true_ref = NodeRef { store: id, idx: 1 };
        let terminals = vec![
            Node {
                level: TERMINAL_LEVEL,
                low: false_ref,
                high: false_ref,
            },
            Node {
                level: TERMINAL_LEVEL,
                low: true_ref,
                high: true_ref,
            },
        ];
        Ok(BddStore {
            id,
            nodes: terminals,
            unique: HashMap::new(),
            apply_cache: HashMap::new(),
            order,
            level_by_bit,
        })
    }

    /// A store covering every bit used by the rule set, ordered by
    /// ascending global bit index and named from the binarizer map.
    pub fn for_ruleset(ruleset: &RuleSet) -> Result<Self> {
        let mut bits: Vec<usize> = ruleset
            .rules
            .iter()
            .flat_map(|r| r.formula.input_indices.iter().copied())
            .collect();
        bits.sort_unstable();
        bits.dedup();
        Self::for_bits(&bits, &ruleset.map)
    }

    pub fn for_bits(bits: &[usize], map: &BinarizerMap) -> Result<Self> {
        let order = bits
            .iter()
            .map(|&b| {
                map.bit_names
                    .get(b)
                    .map(|n| (b, n.clone()))
                    .ok_or_else(|| Error::Order(format!("bit {b} not named by the map")))
            })
            .collect::<Result<_>>()?;
        Self::new(order)
    }

    pub fn false_ref(&self) -> NodeRef {
        NodeRef {
            store: self.id,
            idx: 0,
        }
    }

    pub fn true_ref(&self) -> NodeRef {
        NodeRef {
            store: self.id,
            idx: 1,
        }
    }

    pub fn is_terminal(&self, r: NodeRef) -> bool {
        r.idx < 2
    }

    pub fn n_vars(&self) -> usize {
        self.order.len()
    }

    /// Total decision nodes ever allocated (terminals excluded).
    pub fn allocated_nodes(&self) -> usize {
        self.nodes.len() - 2
    }

    fn check_ref(&self, r: NodeRef) -> Result<()> {
        if r.store != self.id {
            return Err(Error::Store(format!(
                "ref from store {} used with store {}",
                r.store, self.id
            )));
        }
        Ok(())
    }

    fn node(&self, r: NodeRef) -> Node {
        self.nodes[r.idx as usize]
    }

    /// Hash-consed node constructor; enforces both reduction rules.
    fn mk(&mut self, level: u32, low: NodeRef, high: NodeRef) -> NodeRef {
        if low == high {
            return low;
        }
        if let Some(&r) = self.unique.get(&(level, low, high)) {
            return r;
        }
        let r = NodeRef {
            store: self.id,
            idx: self.nodes.len() as u32,
        };
        self.nodes.push(Node { level, low, high });
        self.unique.insert((level, low, high), r);
        r
    }

    /// Single-variable function for the given level.
    pub fn var(&mut self, level: u32) -> NodeRef {
        let (f, t) = (self.false_ref(), self.true_ref());
        self.mk(level, f, t)
    }

    pub fn level_of_bit(&self, bit: usize) -> Result<u32> {
        self.level_by_bit
            .get(&bit)
            .copied()
            .ok_or_else(|| Error::Order(format!("bit {bit} is not in the variable order")))
    }

    /// Canonical combination of two functions, memoized per (op, a, b).
    pub fn apply(&mut self, op: Op, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.check_ref(a)?;
        self.check_ref(b)?;
        Ok(self.apply_inner(op, a, b))
    }

    fn apply_inner(&mut self, op: Op, a: NodeRef, b: NodeRef) -> NodeRef {
        let (f, t) = (self.false_ref(), self.true_ref());
        match op {
            Op::And => {
                if a == f || b == f {
                    return f;
                }
                if a == t {
                    return b;
                }
                if b == t {
                    return a;
                }
                if a == b {
                    return a;
                }
            }
            Op::Or => {
                if a == t || b == t {
                    return t;
                }
                if a == f {
                    return b;
                }
                if b == f {
                    return a;
                }
                if a == b {
                    return a;
                }
            }
            Op::Xor => {
                if a == b {
                    return f;
                }
                if a == f {
                    return b;
                }
                if b == f {
                    return a;
                }
            }
        }
        if let Some(&r) = self.apply_cache.get(&(op, a, b)) {
            return r;
        }
        let (na, nb) = (self.node(a), self.node(b));
        let split = na.level.min(nb.level);
        let (a_lo, a_hi) = if na.level == split {
            (na.low, na.high)
        } else {
            (a, a)
        };
        let (b_lo, b_hi) = if nb.level == split {
            (nb.low, nb.high)
        } else {
            (b, b)
        };
        let lo = self.apply_inner(op, a_lo, b_lo);
        let hi = self.apply_inner(op, a_hi, b_hi);
        let r = self.mk(split, lo, hi);
        self.apply_cache.insert((op, a, b), r);
        r
    }

    /// BDD of one cube: the conjunction of its fixed literals.
    pub fn build_cube(&mut self, dnf: &DnfFormula, cube_idx: usize) -> Result<NodeRef> {
        let cube = &dnf.cubes[cube_idx];
        let mut literals: Vec<(u32, bool)> = cube
            .literals(dnf.k)
            .into_iter()
            .map(|(var, positive)| {
                self.level_of_bit(dnf.input_indices[var])
                    .map(|lvl| (lvl, positive))
            })
            .collect::<Result<_>>()?;
        literals.sort_by_key(|&(level, _)| std::cmp::Reverse(level));
        let (f, t) = (self.false_ref(), self.true_ref());
        let mut acc = t;
        for (level, positive) in literals {
            acc = if positive {
                self.mk(level, f, acc)
            } else {
                self.mk(level, acc, f)
            };
        }
        Ok(acc)
    }

    /// Canonical ROBDD of a DNF under the store order: OR over the cube
    /// BDDs. Building the same function twice returns the same ref.
    pub fn build_from_dnf(&mut self, dnf: &DnfFormula) -> Result<NodeRef> {
        let mut acc = self.false_ref();
        for idx in 0..dnf.cubes.len() {
            let cube = self.build_cube(dnf, idx)?;
            acc = self.apply(Op::Or, acc, cube)?;
        }
        Ok(acc)
    }

    /// Follow the assignment (one bit per level) to a terminal.
    pub fn eval(&self, r: NodeRef, assignment: &[bool]) -> Result<bool> {
        self.check_ref(r)?;
        if assignment.len() < self.order.len() {
            return Err(Error::Order(format!(
                "assignment covers {} of {} variables",
                assignment.len(),
                self.order.len()
            )));
        }
        let mut cur = r;
        while !self.is_terminal(cur) {
            let n = self.node(cur);
            cur = if assignment[n.level as usize] {
                n.high
            } else {
                n.low
            };
        }
        Ok(cur == self.true_ref())
    }

    /// True iff the BDD equals the table on every non-don't-care row.
    pub fn check_equivalence(&self, r: NodeRef, table: &TruthTable) -> Result<bool> {
        self.check_ref(r)?;
        let levels: Vec<u32> = table
            .input_indices
            .iter()
            .map(|&bit| self.level_of_bit(bit))
            .collect::<Result<_>>()?;
        let mut assignment = vec![false; self.order.len()];
        for row in 0..table.n_rows() as u16 {
            if table.dont_care[row as usize] {
                continue;
            }
            for a in assignment.iter_mut() {
                *a = false;
            }
            for (j, &lvl) in levels.iter().enumerate() {
                assignment[lvl as usize] = (row >> j) & 1 == 1;
            }
            if self.eval(r, &assignment)? != table.outputs[row as usize] {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Reachable decision nodes under a root.
    pub fn node_count(&self, r: NodeRef) -> usize {
        self.reachable(r).len()
    }

    fn reachable(&self, r: NodeRef) -> Vec<u32> {
        let mut seen = std::collections::BTreeSet::new();
        let mut stack = vec![r];
        while let Some(cur) = stack.pop() {
            if self.is_terminal(cur) || !seen.insert(cur.idx) {
                continue;
            }
            let n = self.node(cur);
            stack.push(n.low);
            stack.push(n.high);
        }
        seen.into_iter().collect()
    }

    /// Walk the reachable graph and assert both reduction invariants.
    pub fn check_reduced(&self, r: NodeRef) -> bool {
        let mut triples = std::collections::BTreeSet::new();
        for idx in self.reachable(r) {
            let n = self.nodes[idx as usize];
            if n.low == n.high {
                return false;
            }
            if !triples.insert((n.level, n.low, n.high)) {
                return false;
            }
            // levels strictly increase along every edge
            for child in [n.low, n.high] {
                if !self.is_terminal(child) && self.node(child).level <= n.level {
                    return false;
                }
            }
        }
        true
    }

    /// DOT text for one root: boxes labeled with bit names, plain arrows
    /// for true edges, hollow-dot tails for false edges (the "feature is
    /// false" convention), terminals "0"/"1". Node IDs are arena indices,
    /// stable across runs for identical stores.
    pub fn to_dot(&self, r: NodeRef, graph_name: &str) -> Result<String> {
        self.check_ref(r)?;
        let mut out = String::new();
        out.push_str(&format!("digraph \"{}\" {{\n", escape(graph_name)));
        out.push_str("  node [shape=box];\n");
        self.write_dot_nodes(&[r], &mut out);
        out.push_str("}\n");
        Ok(out)
    }

    /// One combined graph: an entry point per rule, shared nodes shared.
    pub fn to_dot_combined(&self, roots: &[(String, NodeRef)]) -> Result<String> {
        for (_, r) in roots {
            self.check_ref(*r)?;
        }
        let mut out = String::new();
        out.push_str("digraph rules {\n  node [shape=box];\n");
        for (i, (label, r)) in roots.iter().enumerate() {
            out.push_str(&format!(
                "  r{i} [label=\"{}\" shape=plaintext];\n  r{i} -> n{};\n",
                escape(label),
                r.idx
            ));
        }
        let refs: Vec<NodeRef> = roots.iter().map(|&(_, r)| r).collect();
        self.write_dot_nodes(&refs, &mut out);
        out.push_str("}\n");
        Ok(out)
    }

    fn write_dot_nodes(&self, roots: &[NodeRef], out: &mut String) {
        let mut reach = std::collections::BTreeSet::new();
        let mut terminals = std::collections::BTreeSet::new();
        for &r in roots {
            if self.is_terminal(r) {
                terminals.insert(r.idx);
            }
            for idx in self.reachable(r) {
                reach.insert(idx);
                let n = self.nodes[idx as usize];
                for child in [n.low, n.high] {
                    if self.is_terminal(child) {
                        terminals.insert(child.idx);
                    }
                }
            }
        }
        for idx in terminals {
            out.push_str(&format!("  n{idx} [label=\"{idx}\"];\n"));
        }
        for idx in &reach {
            let n = self.nodes[*idx as usize];
            let name = &self.order[n.level as usize].1;
            out.push_str(&format!("  n{idx} [label=\"{}\"];\n", escape(name)));
        }
        for idx in &reach {
            let n = self.nodes[*idx as usize];
            out.push_str(&format!("  n{idx} -> n{};\n", n.high.idx));
            out.push_str(&format!(
                "  n{idx} -> n{} [dir=both arrowtail=odot];\n",
                n.low.idx
            ));
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::Cube;

    fn store(n_vars: usize) -> BddStore {
        BddStore::new((0..n_vars).map(|i| (i, format!("x{i}"))).collect()).unwrap()
    }

    fn dnf(k: usize, patterns: &[&str]) -> DnfFormula {
        DnfFormula {
            k,
            input_indices: (0..k).collect(),
            cubes: patterns
                .iter()
                .map(|p| Cube::from_pattern(p).unwrap())
                .collect(),
        }
    }

    #[test]
    fn zero_cube_dnf_is_false_terminal() {
        let mut s = store(2);
        let r = s.build_from_dnf(&dnf(2, &[])).unwrap();
        assert_eq!(r, s.false_ref());
        assert_eq!(s.node_count(r), 0);
    }

    #[test]
    fn single_variable_dnf_is_one_node() {
        let mut s = store(2);
        let r = s.build_from_dnf(&dnf(2, &["1-"])).unwrap();
        assert_eq!(s.node_count(r), 1);
        assert!(s.eval(r, &[true, false]).unwrap());
        assert!(!s.eval(r, &[false, true]).unwrap());
    }

    #[test]
    fn xor_of_two_variables_has_three_nodes() {
        let mut s = store(2);
        let r = s.build_from_dnf(&dnf(2, &["10", "01"])).unwrap();
        assert_eq!(s.node_count(r), 3);
        for code in 0..4u16 {
            let a = [(code & 1) == 1, (code & 2) == 2];
            assert_eq!(s.eval(r, &a).unwrap(), a[0] ^ a[1]);
        }
    }

    #[test]
    fn xor_chain_node_counts() {
        for n in [2usize, 3, 4] {
            let mut s = store(n);
            let mut acc = s.false_ref();
            for lvl in 0..n {
                let v = s.var(lvl as u32);
                acc = s.apply(Op::Xor, acc, v).unwrap();
            }
            assert_eq!(s.node_count(acc), 2 * n - 1, "xor of {n} variables");
            assert!(s.check_reduced(acc));
        }
    }

    #[test]
    fn apply_identities() {
        let mut s = store(3);
        let x0 = s.var(0);
        let t = s.true_ref();
        let f = s.false_ref();
        assert_eq!(s.apply(Op::And, x0, t).unwrap(), x0);
        assert_eq!(s.apply(Op::Or, x0, f).unwrap(), x0);
        let g = s.build_from_dnf(&dnf(3, &["11-", "0-1"])).unwrap();
        assert_eq!(s.apply(Op::Xor, g, g).unwrap(), f);
    }

    #[test]
    fn or_of_minterms_equals_dnf_build() {
        // on-set {1,3} over 2 vars is the function x0
        let mut s = store(2);
        let a = s.build_from_dnf(&dnf(2, &["10", "11"])).unwrap();
        let b = s.build_from_dnf(&dnf(2, &["1-"])).unwrap();
        assert_eq!(a, b);
        assert_eq!(s.node_count(a), 1);
    }

    #[test]
    fn idempotent_build_allocates_nothing_new() {
        let mut s = store(4);
        let f = dnf(4, &["1-0-", "01--", "--11"]);
        let r1 = s.build_from_dnf(&f).unwrap();
        let allocated = s.allocated_nodes();
        let r2 = s.build_from_dnf(&f).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(s.allocated_nodes(), allocated);
    }

    #[test]
    fn eval_of_terminals() {
        let s = store(2);
        assert!(!s.eval(s.false_ref(), &[true, true]).unwrap());
        assert!(s.eval(s.true_ref(), &[false, false]).unwrap());
    }

    #[test]
    fn foreign_ref_is_a_store_error() {
        let mut a = store(2);
        let mut b = store(2);
        let ra = a.var(0);
        let rb = b.var(0);
        assert!(matches!(b.apply(Op::And, ra, rb), Err(Error::Store(_))));
        assert!(matches!(a.apply(Op::And, ra, rb), Err(Error::Store(_))));
    }

    #[test]
    fn missing_variable_is_an_order_error() {
        let mut s = store(2);
        let f = DnfFormula {
            k: 2,
            input_indices: vec![0, 7],
            cubes: vec![Cube::from_pattern("11").unwrap()],
        };
        assert!(matches!(s.build_from_dnf(&f), Err(Error::Order(_))));
    }

    #[test]
    fn canonicity_over_random_functions() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(555);
        for _ in 0..100 {
            let k = rng.gen_range(2..=6);
            let n = 1usize << k;
            let truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let table = TruthTable {
                k,
                input_indices: (0..k).collect(),
                outputs: truth.clone(),
                dont_care: vec![false; n],
                origin: "rand".into(),
            };
            let minterms = DnfFormula {
                k,
                input_indices: (0..k).collect(),
                cubes: (0..n as u16)
                    .filter(|&r| truth[r as usize])
                    .map(Cube::minterm)
                    .collect(),
            };
            let minimized = crate::rules::minimize_qm(&table);
            let mut s = store(k);
            let a = s.build_from_dnf(&minterms).unwrap();
            let b = s.build_from_dnf(&minimized).unwrap();
            assert_eq!(a, b, "construction routes disagree for k={k}");
            assert!(s.check_reduced(a));
            assert!(s.check_equivalence(a, &table).unwrap());
        }
    }

    #[test]
    fn dot_output_shape() {
        let mut s = BddStore::new(vec![(0, "Mitoses ≥ 3".to_string()), (1, "x".into())]).unwrap();
        let r = s.build_from_dnf(&dnf(2, &["1-"])).unwrap();
        let dot = s.to_dot(r, "rule").unwrap();
        assert!(dot.contains("Mitoses ≥ 3"));
        // one decision node, two terminals, two edges
        assert_eq!(dot.matches("->").count(), 2);
        assert!(dot.contains("arrowtail=odot"));
        assert!(dot.contains("n0 [label=\"0\"]"));
        assert!(dot.contains("n1 [label=\"1\"]"));
        let f = s.false_ref();
        let dot = s.to_dot(f, "false").unwrap();
        assert!(dot.contains("n0 [label=\"0\"]"));
        assert_eq!(dot.matches("->").count(), 0);
    }
}
