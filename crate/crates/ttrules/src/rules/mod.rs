//! Rule extraction: truth-table enumeration, don't-care injection from
//! encoding constraints, and Quine-McCluskey minimization to DNF.

mod extract;
mod qm;
mod truth_table;

pub use extract::extract_rules;
pub use qm::{minimize_qm, Cube, DnfFormula};
pub use truth_table::{enumerate_truth_table, inject_dont_cares, DontCareFlags, TruthTable};
