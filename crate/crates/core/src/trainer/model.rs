use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, TrainError};
use crate::seed;
use crate::vectors::ParameterVector;

/// ReLU MLP with dropout on hidden activations and a single sigmoid output.
///
/// Parameters are laid out layer by layer; each layer stores its weight
/// matrix row-major as `fan_out` rows of `fan_in` entries, then `fan_out`
/// biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub dropout: f64,
}

impl ModelSpec {
    /// Three hidden layers of 128, 64 and 32 units, dropout 0.3.
    pub fn full(input_dim: usize) -> Self {
        ModelSpec {
            input_dim,
            hidden: vec![128, 64, 32],
            dropout: 0.3,
        }
    }

    /// Smaller two-layer variant for desk-scale runs.
    pub fn desk(input_dim: usize) -> Self {
        ModelSpec {
            input_dim,
            hidden: vec![32, 16],
            dropout: 0.3,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.input_dim == 0 {
            return Err(TrainError::InvalidSpec("input_dim must be positive".into()));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(TrainError::InvalidSpec("hidden layer of width 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(TrainError::InvalidSpec(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` for every layer including the output unit.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut fan_in = self.input_dim;
        for &h in &self.hidden {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims.push((fan_in, 1));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|(i, o)| i * o + o).sum()
    }

    fn check(&self, w: &ParameterVector) -> Result<(), TrainError> {
        let expected = self.param_count();
        if w.len() != expected {
            return Err(TrainError::ParameterCount {
                expected,
                got: w.len(),
            });
        }
        Ok(())
    }
}

/// He-scaled normal weights (`std = sqrt(2 / fan_in)`), zero biases.
pub fn init_model(spec: &ModelSpec, seed_value: u64) -> ParameterVector {
    let mut rng = seed::rng(seed_value, "init", &[]);
    let mut w = Vec::with_capacity(spec.param_count());
    for (fan_in, fan_out) in spec.layers() {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
        w.extend((0..fan_in * fan_out).map(|_| normal.sample(&mut rng)));
        w.extend(std::iter::repeat(0.0).take(fan_out));
    }
    ParameterVector(w)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on the logit, `softplus(z) - y z`, computed stably.
fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

/// Per-sample buffers reused across the samples of a batch.
pub(crate) struct Workspace {
    layers: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    /// `acts[l]` is the input to layer `l`; `acts[0]` is the feature row.
    acts: Vec<Vec<f64>>,
    /// Derivative multiplier of each hidden activation (ReLU gate x dropout scale).
    gates: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    pub(crate) fn new(spec: &ModelSpec) -> Self {
        let layers = spec.layers();
        let mut offsets = Vec::with_capacity(layers.len());
        let mut off = 0;
        for (i, o) in &layers {
            offsets.push(off);
            off += i * o + o;
        }
        let acts = layers.iter().map(|(i, _)| vec![0.0; *i]).collect();
        let gates = layers.iter().map(|(_, o)| vec![0.0; *o]).collect();
        let deltas = layers.iter().map(|(_, o)| vec![0.0; *o]).collect();
        Workspace {
            layers,
            offsets,
            acts,
            gates,
            deltas,
        }
    }

    /// Forward pass returning the output logit. With `dropout = Some((p, rng))`
    /// each hidden unit is kept with probability `1 - p` and rescaled by
    /// `1 / (1 - p)`.
    pub(crate) fn logit<R: Rng>(
        &mut self,
        w: &[f64],
        x: &[f64],
        mut dropout: Option<(f64, &mut R)>,
    ) -> f64 {
        self.acts[0].copy_from_slice(x);
        let last = self.layers.len() - 1;
        for l in 0..last {
            let (fan_in, fan_out) = self.layers[l];
            let off = self.offsets[l];
            let (weights, biases) = w[off..off + fan_in * fan_out + fan_out].split_at(fan_in * fan_out);
            let (before, after) = self.acts.split_at_mut(l + 1);
            let input = &before[l];
            let output = &mut after[0];
            let gates = &mut self.gates[l];
            for o in 0..fan_out {
                let row = &weights[o * fan_in..(o + 1) * fan_in];
                let z = biases[o] + row.iter().zip(input.iter()).map(|(a, b)| a * b).sum::<f64>();
                let mut gate = if z > 0.0 { 1.0 } else { 0.0 };
                if let Some((p, rng)) = dropout.as_mut() {
                    gate = if rng.gen::<f64>() < *p { 0.0 } else { gate / (1.0 - *p) };
                }
                gates[o] = gate;
                output[o] = z * gate;
            }
        }
        let (fan_in, _) = self.layers[last];
        let off = self.offsets[last];
        let input = &self.acts[last];
        w[off + fan_in] + w[off..off + fan_in].iter().zip(input).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Forward and backward for one sample; accumulates `scale * dloss/dw`
    /// into `grad` and returns the sample loss.
    pub(crate) fn accumulate<R: Rng>(
        &mut self,
        w: &[f64],
        x: &[f64],
        y: f64,
        dropout: Option<(f64, &mut R)>,
        scale: f64,
        grad: &mut [f64],
    ) -> f64 {
        let z = self.logit(w, x, dropout);
        let loss = bce_from_logit(z, y);
        let last = self.layers.len() - 1;
        self.deltas[last][0] = sigmoid(z) - y;
        for l in (0..=last).rev() {
            let (fan_in, fan_out) = self.layers[l];
            let off = self.offsets[l];
            let input = &self.acts[l];
            let delta = &self.deltas[l];
            for o in 0..fan_out {
                let d = delta[o] * scale;
                if d != 0.0 {
                    let g = &mut grad[off + o * fan_in..off + (o + 1) * fan_in];
                    for (gi, a) in g.iter_mut().zip(input) {
                        *gi += d * a;
                    }
                }
                grad[off + fan_in * fan_out + o] += d;
            }
            if l > 0 {
                let (before, after) = self.deltas.split_at_mut(l);
                let prev = &mut before[l - 1];
                let delta = &after[0];
                let gates = &self.gates[l - 1];
                for (i, p) in prev.iter_mut().enumerate() {
                    let back: f64 = (0..fan_out).map(|o| w[off + o * fan_in + i] * delta[o]).sum();
                    *p = back * gates[i];
                }
            }
        }
        loss
    }
}

/// Model output probability for one feature row.
///
/// Dropout is applied only when `train_mode` is set, with masks drawn from
/// `seed_value`.
pub fn forward(
    spec: &ModelSpec,
    w: &ParameterVector,
    x: &[f64],
    train_mode: bool,
    seed_value: u64,
) -> Result<f64, TrainError> {
    spec.check(w)?;
    if x.len() != spec.input_dim {
        return Err(TrainError::DimensionMismatch {
            expected: spec.input_dim,
            got: x.len(),
        });
    }
    let mut ws = Workspace::new(spec);
    let z = if train_mode && spec.dropout > 0.0 {
        let mut rng = seed::rng(seed_value, "forward-dropout", &[]);
        ws.logit(&w.0, x, Some((spec.dropout, &mut rng)))
    } else {
        ws.logit::<rand_chacha::ChaCha20Rng>(&w.0, x, None)
    };
    Ok(sigmoid(z))
}

/// Exact gradient of the mean binary cross-entropy over `batch`, dropout off.
pub fn gradient(
    spec: &ModelSpec,
    w: &ParameterVector,
    batch: &Dataset,
) -> Result<ParameterVector, TrainError> {
    spec.check(w)?;
    if batch.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if batch.dim() != spec.input_dim {
        return Err(TrainError::DimensionMismatch {
            expected: spec.input_dim,
            got: batch.dim(),
        });
    }
    let mut ws = Workspace::new(spec);
    let mut grad = vec![0.0; w.len()];
    let scale = 1.0 / batch.len() as f64;
    for i in 0..batch.len() {
        ws.accumulate::<rand_chacha::ChaCha20Rng>(
            &w.0,
            batch.row(i),
            batch.label(i) as f64,
            None,
            scale,
            &mut grad,
        );
    }
    Ok(ParameterVector(grad))
}

/// Mean binary cross-entropy over `data`, dropout off.
pub fn mean_loss(spec: &ModelSpec, w: &ParameterVector, data: &Dataset) -> Result<f64, TrainError> {
    spec.check(w)?;
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut ws = Workspace::new(spec);
    let total: f64 = (0..data.len())
        .map(|i| {
            let z = ws.logit::<rand_chacha::ChaCha20Rng>(&w.0, data.row(i), None);
            bce_from_logit(z, data.label(i) as f64)
        })
        .sum();
    Ok(total / data.len() as f64)
}
