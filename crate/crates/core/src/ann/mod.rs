//! Feed-forward neural network engine and the trace-driven prediction cases.

use std::io;

use thiserror::Error;

pub mod activation;
pub mod cases;
mod dd;
pub mod gradcheck;
pub mod model_io;
pub mod network;
pub mod train;

pub use activation::Activation;
pub use cases::{
    build_case, build_case_normalized, case_topology, predict_case, CaseDataset, CaseId,
    CaseOptions, Normalization, Prediction,
};
pub use gradcheck::{
    gradient_audit, gradient_check, relative_error, AuditReport, ComboResult, GradCheckResult,
    AUDIT_TOLERANCE, FD_EPSILON,
};
pub use model_io::{read_model, write_model, SavedModel};
pub use network::{ForwardPass, Gradients, Layer, LayerSpec, LossKind, Mlp};
pub use train::{
    evaluate, metrics, split_dataset, train, write_metrics_csv, AccuracyRule, EpochMetrics,
    Metrics, Optimizer, Split, TrainConfig, METRICS_COLUMNS,
};

#[derive(Debug, Error)]
pub enum AnnError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("layer {0} has non-finite parameters")]
    NonFiniteWeights(usize),
    #[error("loss became non-finite at epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize },
    #[error("need at least 2 rows to split, got {0}")]
    TooFewRows(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("trace is missing column `{0}`")]
    MissingColumn(String),
    #[error("unknown case {0}; expected 1, 2, 3 or 4")]
    InvalidCase(u32),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
