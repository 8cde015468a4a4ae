//! Gaussian mechanism for per-round update privacy.
//!
//! Only the per-round mechanism is implemented. Composition across rounds is
//! not tracked.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;
use crate::vectors::ParameterVector;

#[derive(Debug, Error, PartialEq)]
pub enum PrivacyError {
    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpConfig {
    pub enabled: bool,
    pub epsilon: f64,
    pub delta: f64,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig {
            enabled: false,
            epsilon: 2.0,
            delta: 1e-5,
        }
    }
}

impl DpConfig {
    pub fn validate(&self) -> Result<(), PrivacyError> {
        calibrate_sigma(self.epsilon, self.delta, 0.0).map(|_| ())
    }

    /// Noise scale for clip bound `clip`, zero when disabled.
    pub fn sigma(&self, clip: f64) -> Result<f64, PrivacyError> {
        if self.enabled {
            calibrate_sigma(self.epsilon, self.delta, clip)
        } else {
            Ok(0.0)
        }
    }
}

/// `sigma = C * sqrt(2 ln(1.25 / delta)) / epsilon`.
pub fn calibrate_sigma(epsilon: f64, delta: f64, clip: f64) -> Result<f64, PrivacyError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(PrivacyError::InvalidBudget(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PrivacyError::InvalidBudget(format!("delta must be in (0, 1), got {delta}")));
    }
    if !(clip >= 0.0) {
        return Err(PrivacyError::InvalidBudget(format!("clip bound must be non-negative, got {clip}")));
    }
    Ok(clip * (2.0 * (1.25 / delta).ln()).sqrt() / epsilon)
}

/// `update + N(0, sigma^2)` per coordinate, from a stream keyed by `seed`.
pub fn add_dp_noise(update: &ParameterVector, sigma: f64, seed: u64) -> ParameterVector {
    if sigma == 0.0 {
        return update.clone();
    }
    let mut rng = seed::rng(seed, "dp-noise", &[]);
    ParameterVector(
        update
            .as_slice()
            .iter()
            .map(|&x| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x + sigma * z
            })
            .collect(),
    )
}
