use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::seed;

/// Row-major feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<u8>,
}

impl Dataset {
    /// Panics if `features.len() != labels.len() * dim` or a label is not 0/1.
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<u8>) -> Self {
        assert_eq!(features.len(), labels.len() * dim, "feature matrix shape");
        assert!(labels.iter().all(|&y| y <= 1), "labels must be 0 or 1");
        Dataset {
            dim,
            features,
            labels,
        }
    }

    pub fn empty(dim: usize) -> Self {
        Dataset {
            dim,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn push(&mut self, row: &[f64], label: u8) {
        assert_eq!(row.len(), self.dim);
        assert!(label <= 1);
        self.features.extend_from_slice(row);
        self.labels.push(label);
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut out = Dataset::empty(self.dim);
        out.features.reserve(indices.len() * self.dim);
        for &i in indices {
            out.push(self.row(i), self.label(i));
        }
        out
    }

    pub fn set_label(&mut self, i: usize, label: u8) {
        assert!(label <= 1);
        self.labels[i] = label;
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }
}

/// Per-column standardization fitted on one split and applied to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation per column. Constant columns
    /// get `std = 1` so they are only centered.
    pub fn fit(data: &Dataset) -> Standardizer {
        let d = data.dim();
        let n = data.len().max(1) as f64;
        let mut means = vec![0.0; d];
        for i in 0..data.len() {
            for (m, x) in means.iter_mut().zip(data.row(i)) {
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; d];
        for i in 0..data.len() {
            for ((v, x), m) in vars.iter_mut().zip(data.row(i)).zip(&means) {
                *v += (x - m) * (x - m);
            }
        }
        let stds = vars
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { means, stds }
    }

    pub fn apply(&self, data: &Dataset) -> Dataset {
        let d = data.dim();
        let features = data
            .features()
            .chunks(d.max(1))
            .flat_map(|row| {
                row.iter()
                    .zip(self.means.iter().zip(&self.stds))
                    .map(|(x, (m, s))| (x - m) / s)
            })
            .collect();
        Dataset::new(d, features, data.labels().to_vec())
    }
}

/// Two isotropic unit-variance Gaussian blobs whose means are `separation`
/// apart along the diagonal direction. Labels alternate so the class counts
/// differ by at most one.
pub fn make_synthetic(n: usize, d: usize, separation: f64, seed_value: u64) -> Dataset {
    assert!(n >= 2 && d >= 1, "need n >= 2 and d >= 1");
    let mut rng = seed::rng(seed_value, "synthetic", &[n as u64, d as u64]);
    let offset = separation / 2.0 / (d as f64).sqrt();
    let mut data = Dataset::empty(d);
    let mut row = vec![0.0; d];
    for i in 0..n {
        let label = (i % 2) as u8;
        let sign = if label == 1 { 1.0 } else { -1.0 };
        for x in row.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x = z + sign * offset;
        }
        data.push(&row, label);
    }
    data
}
