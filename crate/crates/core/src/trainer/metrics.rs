use serde::{Deserialize, Serialize};

use super::model::{forward, mean_loss};
use super::{Dataset, ModelSpec, TrainError};
use crate::vectors::ParameterVector;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub loss: f64,
}

impl MetricsReport {
    /// Metrics from confusion-matrix counts. Undefined ratios are reported as 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize, loss: f64) -> Self {
        let total = (tp + fp + fn_ + tn) as f64;
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        MetricsReport {
            accuracy: if total > 0.0 { (tp + tn) as f64 / total } else { 0.0 },
            precision,
            recall,
            f1,
            loss,
        }
    }
}

/// Confusion-matrix metrics at the 0.5 threshold plus mean BCE.
pub fn evaluate(spec: &ModelSpec, w: &ParameterVector, test: &Dataset) -> Result<MetricsReport, TrainError> {
    if test.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for i in 0..test.len() {
        let predicted = forward(spec, w, test.row(i), false, 0)? >= 0.5;
        match (predicted, test.label(i) == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let loss = mean_loss(spec, w, test)?;
    Ok(MetricsReport::from_counts(tp, fp, fn_, tn, loss))
}
