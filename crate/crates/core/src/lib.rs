//! Byzantine-robust federated learning with post-quantum secure aggregation.
//!
//! The crate is organised around the protocol's moving parts:
//!
//! * [`vectors`] - parameter vectors, the `Z_{2^32}` ring and fixed-point
//!   quantization, plus the robust statistics everything else builds on.
//! * [`trainer`] - the local MLP, SGD, datasets, partitioning and metrics.
//! * [`robust_agg`] - reputation scoring, adaptive clipping, weighted
//!   aggregation, stratified selection and the FedAvg/median/Krum baselines.
//! * [`secure_agg`] - KEM handshakes, pairwise masks, unmasking and Shamir
//!   based dropout recovery.
//! * [`privacy`] - the Gaussian mechanism.
//! * [`adversary`] - Byzantine client behaviours.
//! * [`sim`] - scenario configuration, the round orchestrator, byte
//!   accounting, metrics files and the masking self-check.

pub mod adversary;
pub mod privacy;
pub mod robust_agg;
pub mod secure_agg;
pub mod seed;
pub mod sim;
pub mod trainer;
pub mod vectors;

use std::fmt;

use serde::{Deserialize, Serialize};

/// Identity of a federation participant.
///
/// Ordering matters: the masking protocol and every tie-break in the
/// aggregation pipeline use ascending id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClientId(pub u32);

impl ClientId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for ClientId {
    fn from(v: u32) -> Self {
        ClientId(v)
    }
}

pub use vectors::{ParameterVector, QuantizationConfig, RingVector};
