//! Scenario-driven simulation: configuration, the round orchestrator,
//! communication accounting, metrics files and the masking self-check.
//!
//! Three modes trade visibility for fidelity. `plaintext` hands every
//! update to the server. `masked` shows the server only the secure sum, so
//! reputations cannot be updated. `hybrid` updates the model from the secure
//! sum and feeds per-client updates to the reputation engine through a
//! simulation-only oracle channel that sits outside the privacy boundary.

mod bytes;
mod config;
mod output;
mod run;
mod verify;

pub use bytes::{account_bytes, setup_bytes, ByteCounts, RoundContext};
pub use config::{
    Aggregator, ConfigError, DataConfig, DataSource, DropoutConfig, DropoutEvent, FederationConfig, Mode,
    ModelConfig, ScenarioConfig, SelectionSection, ShamirSection, TrainingConfig,
};
pub use output::{canonical_json, emit_metrics, round_sig9, rounds_jsonl};
pub use run::{
    convergence_round, load_data, run_experiment, scenario_param_count, ClientRound, ExperimentResult, RoundReport,
    Simulation,
};
pub use verify::{verify_masking, CheckKind, MaskFault, MaskingFailure, MaskingReport};

use thiserror::Error;

use crate::adversary::AdversaryError;
use crate::privacy::PrivacyError;
use crate::robust_agg::AggError;
use crate::secure_agg::SecureAggError;
use crate::trainer::TrainError;
use crate::vectors::VectorError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Agg(#[from] AggError),
    #[error(transparent)]
    SecureAgg(#[from] SecureAggError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("serialization: {0}")]
    Serialize(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
