//! TT-rules: train a truth-table-constrained network on tabular data,
//! extract an exactly equivalent set of weighted Boolean rules, optimize
//! the rule set, and compile each rule to a reduced ordered binary
//! decision diagram.
//!
//! The pipeline stages map onto the modules:
//!
//! - [`data`]: CSV ingestion, quantile/one-hot binarization, k-fold splits
//! - [`net`]: the truth-table network and its training
//! - [`rules`]: truth-table enumeration, don't-cares, Quine-McCluskey
//! - [`ruleset`]: the rule model, optimization passes, exactness checks
//! - [`bdd`]: ROBDD compilation and DOT export
//! - [`eval`]: metrics and the cross-validation harness
//!
//! ```no_run
//! use ttrules::data::{load_csv, fit_binarizer, binarize, Schema, TaskKind};
//! use ttrules::net::{build_model, train, collect_patch_support, Hyperparams};
//! use ttrules::rules::{extract_rules, DontCareFlags};
//! use ttrules::ruleset::{optimize_ruleset, verify_exactness};
//!
//! # fn main() -> Result<(), ttrules::Error> {
//! let schema = Schema::from_json_file("schema.json".as_ref())?;
//! let raw = load_csv("data.csv".as_ref(), &schema)?;
//! let map = fit_binarizer(&raw)?;
//! let ds = binarize(&raw, &map, TaskKind::Binary)?;
//! let model = build_model(map.total_bits, 40, 6, 4, ds.task, 0)?;
//! let trained = train(&model, &ds, &ds, &Hyperparams::default())?;
//! let support = collect_patch_support(&trained.model, &ds);
//! let rules = extract_rules(&trained.model, &map, &support, DontCareFlags::default())?;
//! let (rules, report) = optimize_ruleset(&rules, &ds, 1.0)?;
//! let check = verify_exactness(&rules, &trained.model, &ds)?;
//! assert_eq!(check.agreement, 1.0);
//! println!("{} rules ({report:?})", rules.rules.len());
//! # Ok(())
//! # }
//! ```

pub mod bdd;
pub mod config;
pub mod data;
mod error;
pub mod eval;
pub mod io;
pub mod net;
pub mod rules;
pub mod ruleset;

pub use error::{Error, Result};
