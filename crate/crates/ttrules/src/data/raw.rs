use std::path::Path;

use crate::data::schema::{FeatureKind, Schema, Task, TaskKind};
use crate::error::{Error, Result};

/// One loaded feature column, typed according to its spec.
#[derive(Debug, Clone)]
pub enum Column {
    Numeric(Vec<f64>),
    Text(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-sample targets after binding the task kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    Classes(Vec<usize>),
    Values(Vec<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Classes(v) => v.len(),
            Labels::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subset(&self, indices: &[usize]) -> Labels {
        match self {
            Labels::Classes(v) => Labels::Classes(indices.iter().map(|&i| v[i]).collect()),
            Labels::Values(v) => Labels::Values(indices.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Column-typed table in row order, as loaded from CSV.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub schema: Schema,
    pub columns: Vec<Column>,
    pub target: Vec<String>,
    pub n_rows: usize,
}

impl RawDataset {
    /// Sorted distinct target strings; classification classes are indexed
    /// by this order.
    pub fn class_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.target.clone();
        names.sort();
        names.dedup();
        names
    }

    /// Bind targets to the requested task kind.
    pub fn labels(&self, kind: TaskKind) -> Result<(Labels, Task)> {
        match kind {
            TaskKind::Regression => {
                let mut values = Vec::with_capacity(self.n_rows);
                for (row, raw) in self.target.iter().enumerate() {
                    let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
                        row,
                        column: self.schema.target.clone(),
                        message: format!(
                            "cannot parse '{raw}' as a regression target (task mismatch?)"
                        ),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse {
                            row,
                            column: self.schema.target.clone(),
                            message: format!("non-finite target '{raw}'"),
                        });
                    }
                    values.push(v);
                }
                Ok((Labels::Values(values), Task::Regression))
            }
            TaskKind::Binary | TaskKind::Multiclass => {
                let names = self.class_names();
                if kind == TaskKind::Binary && names.len() != 2 {
                    return Err(Error::Value(format!(
                        "binary task requires exactly 2 classes, found {}",
                        names.len()
                    )));
                }
                if names.len() < 2 {
                    return Err(Error::Value(format!(
                        "classification requires >= 2 classes, found {}",
                        names.len()
                    )));
                }
                let classes = self
                    .target
                    .iter()
                    .map(|t| names.binary_search(t).expect("target in class list"))
                    .collect();
                let task = match kind {
                    TaskKind::Binary => Task::Binary,
                    _ => Task::Multiclass(names.len()),
                };
                Ok((Labels::Classes(classes), task))
            }
        }
    }

    /// Row subset, preserving the given index order.
    pub fn subset(&self, indices: &[usize]) -> RawDataset {
        let columns = self
            .columns
            .iter()
            .map(|col| match col {
                Column::Numeric(v) => Column::Numeric(indices.iter().map(|&i| v[i]).collect()),
                Column::Text(v) => Column::Text(indices.iter().map(|&i| v[i].clone()).collect()),
            })
            .collect();
        RawDataset {
            schema: self.schema.clone(),
            columns,
            target: indices.iter().map(|&i| self.target[i].clone()).collect(),
            n_rows: indices.len(),
        }
    }
}

/// Load an RFC-4180 CSV with a header row against a schema. Row order is
/// preserved; missing values are rejected (callers pre-clean).
pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawDataset> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Schema(format!("cannot open {}: {e}", path.display())))?;

    let headers = reader.headers()?.clone();
    let col_index = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Schema(format!("column '{name}' not found in {}", path.display()))
        })
    };

    let feature_cols: Vec<usize> = schema
        .features
        .iter()
        .map(|f| col_index(&f.name))
        .collect::<Result<_>>()?;
    let target_col = col_index(&schema.target)?;

    let mut columns: Vec<Column> = schema
        .features
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Categorical { .. } => Column::Text(Vec::new()),
            _ => Column::Numeric(Vec::new()),
        })
        .collect();
    let mut target = Vec::new();

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for ((spec, &ci), column) in schema
            .features
            .iter()
            .zip(&feature_cols)
            .zip(columns.iter_mut())
        {
            let cell = record.get(ci).unwrap_or("").trim();
            if cell.is_empty() || cell == "?" {
                return Err(Error::Parse {
                    row,
                    column: spec.name.clone(),
                    message: "missing value (pre-clean the file; imputation is unsupported)".into(),
                });
            }
            match (&spec.kind, column) {
                (FeatureKind::Categorical { categories }, Column::Text(values)) => {
                    if !categories.iter().any(|c| c == cell) {
                        return Err(Error::Value(format!(
                            "feature '{}': unseen category '{cell}' at row {row}",
                            spec.name
                        )));
                    }
                    values.push(cell.to_string());
                }
                (FeatureKind::AlreadyBinary, Column::Numeric(values)) => {
                    let v: f64 = cell.parse().map_err(|_| Error::Parse {
                        row,
                        column: spec.name.clone(),
                        message: format!("cannot parse '{cell}' as a number"),
                    })?;
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::Parse {
                            row,
                            column: spec.name.clone(),
                            message: format!("already-binary feature holds '{cell}', not 0/1"),
                        });
                    }
                    values.push(v);
                }
                (_, Column::Numeric(values)) => {
                    let v: f64 = cell.parse().map_err(|_| Error::Parse {
                        row,
                        column: spec.name.clone(),
                        message: format!("cannot parse '{cell}' as a number"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse {
                            row,
                            column: spec.name.clone(),
                            message: format!("non-finite value '{cell}'"),
                        });
                    }
                    values.push(v);
                }
                _ => unreachable!("column type fixed by schema"),
            }
        }
        let cell = record.get(target_col).unwrap_or("").trim();
        if cell.is_empty() || cell == "?" {
            return Err(Error::Parse {
                row,
                column: schema.target.clone(),
                message: "missing target value".into(),
            });
        }
        target.push(cell.to_string());
    }

    let n_rows = target.len();
    Ok(RawDataset {
        schema: schema.clone(),
        columns,
        target,
        n_rows,
    })
}
