//! Byzantine client behaviours.
//!
//! Update-space attacks rewrite the honestly trained update before clipping;
//! label flipping poisons the local dataset before training. The Byzantine
//! set is chosen once per run.

use std::collections::BTreeSet;

use rand::seq::index;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;
use crate::trainer::Dataset;
use crate::vectors::ParameterVector;
use crate::ClientId;

#[derive(Debug, Error, PartialEq)]
pub enum AdversaryError {
    #[error("invalid attack plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    #[default]
    None,
    GradientFlip,
    SignFlip,
    LabelFlip,
    GaussianNoise,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackPlan {
    pub kind: AttackKind,
    /// Byzantine fraction `beta`.
    pub fraction: f64,
    pub start_round: u64,
    pub flip_scale: f64,
    pub noise_sigma: f64,
    pub label_flip_fraction: f64,
    /// Rounds of attacking per adaptive cycle.
    pub adaptive_on: u64,
    /// Rounds of honest behaviour per adaptive cycle.
    pub adaptive_off: u64,
    pub seed: u64,
}

impl Default for AttackPlan {
    fn default() -> Self {
        AttackPlan {
            kind: AttackKind::None,
            fraction: 0.0,
            start_round: 0,
            flip_scale: 1.0,
            noise_sigma: 1.0,
            label_flip_fraction: 1.0,
            adaptive_on: 10,
            adaptive_off: 10,
            seed: 0,
        }
    }
}

impl AttackPlan {
    pub fn validate(&self) -> Result<(), AdversaryError> {
        let bad = |m: String| Err(AdversaryError::InvalidPlan(m));
        if !(0.0..0.5).contains(&self.fraction) {
            return bad(format!("fraction must be in [0, 0.5), got {}", self.fraction));
        }
        if !(0.0..=1.0).contains(&self.label_flip_fraction) {
            return bad(format!("label_flip_fraction must be in [0, 1], got {}", self.label_flip_fraction));
        }
        if !(self.flip_scale.is_finite() && self.flip_scale >= 0.0) {
            return bad(format!("flip_scale must be finite and non-negative, got {}", self.flip_scale));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be finite and non-negative, got {}", self.noise_sigma));
        }
        if self.kind == AttackKind::Adaptive && self.adaptive_on == 0 {
            return bad("adaptive_on must be positive".into());
        }
        Ok(())
    }

    /// Whether a Byzantine client misbehaves in `round`.
    pub fn is_active(&self, round: u64) -> bool {
        if self.kind == AttackKind::None || round < self.start_round {
            return false;
        }
        match self.kind {
            AttackKind::Adaptive => {
                let period = self.adaptive_on + self.adaptive_off;
                (round - self.start_round) % period < self.adaptive_on
            }
            _ => true,
        }
    }

    /// Whether training data is poisoned for the whole run.
    pub fn poisons_labels(&self) -> bool {
        self.kind == AttackKind::LabelFlip
    }
}

fn flip(honest: &ParameterVector, scale: f64) -> ParameterVector {
    honest.scaled(-scale)
}

/// The update a Byzantine client submits in `round`.
pub fn corrupt_update(honest: &ParameterVector, plan: &AttackPlan, round: u64, client: ClientId) -> ParameterVector {
    if !plan.is_active(round) {
        return honest.clone();
    }
    match plan.kind {
        AttackKind::None | AttackKind::LabelFlip => honest.clone(),
        AttackKind::GradientFlip | AttackKind::Adaptive => flip(honest, plan.flip_scale),
        AttackKind::SignFlip => {
            let xs = honest.as_slice();
            if xs.is_empty() {
                return honest.clone();
            }
            let c = xs.iter().map(|x| x.abs()).sum::<f64>() / xs.len() as f64;
            ParameterVector(
                xs.iter()
                    .map(|&x| if x > 0.0 { -c } else if x < 0.0 { c } else { 0.0 })
                    .collect(),
            )
        }
        AttackKind::GaussianNoise => {
            let normal = Normal::new(0.0, plan.noise_sigma).expect("validated sigma");
            let mut rng = seed::rng(plan.seed, "attack-noise", &[round, client.0 as u64]);
            ParameterVector(honest.as_slice().iter().map(|&x| x + normal.sample(&mut rng)).collect())
        }
    }
}

/// Flip `y -> 1 - y` on a uniform sample of `floor(fraction * n)` rows.
pub fn poison_labels(data: &Dataset, fraction: f64, seed: u64) -> Dataset {
    let n = data.len();
    let count = ((fraction.clamp(0.0, 1.0) * n as f64) + 1e-9).floor() as usize;
    let mut out = data.clone();
    let mut rng = seed::rng(seed, "poison-labels", &[]);
    for i in index::sample(&mut rng, n, count.min(n)) {
        out.set_label(i, 1 - data.label(i));
    }
    out
}

/// `floor(beta * N)` distinct client ids drawn without replacement.
pub fn assign_byzantine(clients: usize, fraction: f64, seed: u64) -> BTreeSet<ClientId> {
    let count = ((fraction * clients as f64) + 1e-9).floor() as usize;
    let mut rng = seed::rng(seed, "byzantine", &[]);
    index::sample(&mut rng, clients, count.min(clients))
        .into_iter()
        .map(|i| ClientId(i as u32))
        .collect()
}
