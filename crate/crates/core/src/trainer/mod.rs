//! Local training: the MLP threat-detection model, minibatch SGD on binary
//! cross-entropy, dataset generation/ingestion/partitioning and evaluation.

mod data;
mod ingest;
mod metrics;
mod model;
mod partition;
mod train;

pub use data::{make_synthetic, Dataset, Standardizer};
pub use ingest::{ingest_csv, ingest_csv_split, Preprocessor, RawTable};
pub use metrics::{evaluate, MetricsReport};
pub use model::{forward, gradient, init_model, mean_loss, ModelSpec};
pub use partition::partition_non_iid;
pub use train::{local_train, TrainConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("feature row has {got} entries, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter vector has {got} entries, model expects {expected}")]
    ParameterCount { expected: usize, got: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("cannot give each of {clients} clients a sample from {samples} samples")]
    TooFewSamples { clients: usize, samples: usize },
    #[error("csv parse error at line {line}: {message}")]
    ParseError { line: u64, message: String },
    #[error("label column {0:?} not found")]
    UnknownLabel(String),
    #[error("column {0:?} not found")]
    UnknownColumn(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
