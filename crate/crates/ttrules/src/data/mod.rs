//! Tabular ingestion: CSV loading, binarization into bit vectors, and
//! deterministic stratified splits.

mod binarizer;
mod bits;
mod raw;
mod schema;
mod split;

pub use binarizer::{
    binarize, fit_binarizer, BinarizedDataset, BinarizerMap, BitOrigin, BitRole, FeatureEncoder,
};
pub use bits::BitMatrix;
pub use raw::{load_csv, Column, Labels, RawDataset};
pub use schema::{FeatureKind, FeatureSpec, Schema, Task, TaskKind};
pub use split::{kfold_split, kfold_split_labels, Fold};
