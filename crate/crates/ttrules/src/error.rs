use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("value error: {0}")]
    Value(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("parameter error: {0}")]
    Param(String),

    #[error("training aborted: non-finite loss at epoch {epoch}, batch {batch} (learning_rate={learning_rate})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        learning_rate: f64,
    },

    #[error("ternarization refused: every head weight would be zeroed; tau scan: {trace}")]
    AllWeightsZeroed { trace: String },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("variable order error: {0}")]
    Order(String),

    #[error("store error: {0}")]
    Store(String),

    #[error("exactness verification failed: {0}")]
    Exactness(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
