use thiserror::Error;

use crate::losses::LossKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("label {label} is not valid for the {loss} loss")]
    LabelDomain { loss: LossKind, label: f64 },

    #[error("invalid parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("dataset must contain at least one example with at least one feature")]
    EmptyDataset,

    #[error("row {row} has norm {norm} above the radius bound {bound}")]
    RadiusBound { row: usize, norm: f64, bound: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("FISTA did not reach the duality gap tolerance {tolerance} in {iters} iterations (gap {gap})")]
    NotConverged {
        gap: f64,
        tolerance: f64,
        iters: usize,
    },

    #[error("task generation failed: {0}")]
    Generation(String),

    #[error("ingestion error at {location}: {message}")]
    Ingestion { location: String, message: String },

    #[error("collection has no true task weights (only synthetic environments record them)")]
    MissingTrueWeights,

    #[error("not enough tasks: requested {requested}, available {available}")]
    InsufficientTasks { requested: usize, available: usize },

    #[error("inconsistent task stream: {0}")]
    InconsistentTasks(String),

    #[error("mismatched problem instance: {0}")]
    Mismatch(&'static str),

    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
