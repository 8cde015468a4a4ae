use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::Workspace;
use super::{Dataset, ModelSpec, TrainError};
use crate::seed;
use crate::vectors::ParameterVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    /// Seed for batch order and dropout masks. The orchestrator derives one
    /// per (client, round).
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            local_epochs: 5,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(TrainError::InvalidConfig(
                "learning_rate must be a non-negative real".into(),
            ));
        }
        if self.local_epochs == 0 {
            return Err(TrainError::InvalidConfig("local_epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Minibatch SGD on mean binary cross-entropy for `cfg.local_epochs` epochs,
/// starting from `w`. Batch order for epoch `e` and the dropout masks of
/// batch `b` come from seeds derived from `(cfg.seed, e[, b])`.
pub fn local_train(
    spec: &ModelSpec,
    w: &ParameterVector,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<ParameterVector, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if data.dim() != spec.input_dim {
        return Err(TrainError::DimensionMismatch {
            expected: spec.input_dim,
            got: data.dim(),
        });
    }
    let expected = spec.param_count();
    if w.len() != expected {
        return Err(TrainError::ParameterCount {
            expected,
            got: w.len(),
        });
    }
    let mut params = w.0.clone();
    let mut grad = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut ws = Workspace::new(spec);
    for epoch in 0..cfg.local_epochs {
        let mut shuffle = seed::rng(cfg.seed, "batch-order", &[epoch as u64]);
        order.sort_unstable();
        order.shuffle(&mut shuffle);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut drop_rng = seed::rng(cfg.seed, "dropout", &[epoch as u64, b as u64]);
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let dropout = (spec.dropout > 0.0).then_some((spec.dropout, &mut drop_rng));
                ws.accumulate(&params, data.row(i), data.label(i) as f64, dropout, scale, &mut grad);
            }
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
        }
    }
    Ok(ParameterVector(params))
}
