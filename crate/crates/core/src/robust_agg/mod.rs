//! Server-side Byzantine robustness: per-round client scoring against a
//! trimmed-mean reference, EMA reputations, adaptive clipping,
//! reputation-weighted aggregation, stratified selection, and the FedAvg /
//! coordinate-wise median / Krum baselines.

mod baselines;
mod clipping;
mod reputation;
mod selection;

pub use baselines::{fedavg_aggregate, krum_aggregate, krum_scores, median_aggregate};
pub use clipping::{adaptive_clip_threshold, clip_update};
pub use reputation::{
    aggregate_weighted, aggregation_weights, compute_scores, normalized_magnitude, round_score, score_round,
    update_reputation, weighted_sum, ClientRecord, ClientScore, ReputationConfig, RoundScore,
};
pub use selection::{select_clients, SelectionConfig};

use thiserror::Error;

use crate::vectors::VectorError;

#[derive(Debug, Error, PartialEq)]
pub enum AggError {
    #[error("empty input")]
    EmptyInput,
    #[error("every participant has zero weight")]
    AllZeroWeights,
    #[error("krum needs n >= f + 3 updates (n = {n}, f = {f})")]
    TooFewClients { n: usize, f: usize },
    #[error("{what}: expected {expected} entries, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("unknown client {0}")]
    UnknownClient(u32),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Vector(#[from] VectorError),
}

pub(crate) fn check_count(what: &'static str, expected: usize, got: usize) -> Result<(), AggError> {
    if expected == got {
        Ok(())
    } else {
        Err(AggError::LengthMismatch { what, expected, got })
    }
}
