//! Flat parameter vectors, the masking ring `Z_q` with `q = 2^32`, fixed-point
//! quantization between the two, and the robust statistics used by the
//! aggregation pipeline.

use std::ops::{Add, AddAssign, Index, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Half the ring modulus, `q/2 = 2^31`.
pub const HALF_MODULUS: u64 = 1 << 31;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VectorError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("coordinate {index} = {value} saturates the ring (scale {scale}, bound {bound})")]
    Saturation {
        index: usize,
        value: f64,
        scale: u64,
        bound: f64,
    },
    #[error("trim fraction {0} outside [0, 0.5)")]
    InvalidTrimFraction(f64),
    #[error("quantization config: {0}")]
    InvalidQuantization(String),
}

/// Real-valued model weights or updates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn zeros(len: usize) -> Self {
        ParameterVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &ParameterVector) -> Result<f64, VectorError> {
        check_len(self.len(), other.len())?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn scaled(&self, factor: f64) -> ParameterVector {
        ParameterVector(self.0.iter().map(|v| v * factor).collect())
    }

    /// `self + factor * other`, in place.
    pub fn axpy(&mut self, factor: f64, other: &ParameterVector) -> Result<(), VectorError> {
        check_len(self.len(), other.len())?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &ParameterVector) -> Result<ParameterVector, VectorError> {
        check_len(self.len(), other.len())?;
        Ok(ParameterVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn add(&self, other: &ParameterVector) -> Result<ParameterVector, VectorError> {
        check_len(self.len(), other.len())?;
        Ok(ParameterVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    /// Largest per-coordinate absolute difference.
    pub fn max_abs_diff(&self, other: &ParameterVector) -> Result<f64, VectorError> {
        check_len(self.len(), other.len())?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        ParameterVector(v)
    }
}

impl Index<usize> for ParameterVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A vector over `Z_{2^32}`. All arithmetic wraps.
///
/// The operator impls panic on length mismatch; use [`RingVector::try_add`]
/// when lengths come from untrusted input.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RingVector(pub Vec<u32>);

impl RingVector {
    pub fn zeros(len: usize) -> Self {
        RingVector(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn words(&self) -> &[u32] {
        &self.0
    }

    pub fn try_add(&self, other: &RingVector) -> Result<RingVector, VectorError> {
        check_len(self.len(), other.len())?;
        Ok(RingVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.wrapping_add(*b))
                .collect(),
        ))
    }

    pub fn try_sub(&self, other: &RingVector) -> Result<RingVector, VectorError> {
        check_len(self.len(), other.len())?;
        Ok(RingVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.wrapping_sub(*b))
                .collect(),
        ))
    }

    /// Modular sum of equal-length vectors.
    pub fn sum<'a, I>(len: usize, items: I) -> Result<RingVector, VectorError>
    where
        I: IntoIterator<Item = &'a RingVector>,
    {
        let mut acc = RingVector::zeros(len);
        for v in items {
            check_len(len, v.len())?;
            acc += v;
        }
        Ok(acc)
    }

    /// Serialized size in bytes (4 bytes per word).
    pub fn byte_len(&self) -> usize {
        4 * self.len()
    }
}

impl<'a> Add<&'a RingVector> for &'a RingVector {
    type Output = RingVector;
    fn add(self, rhs: &'a RingVector) -> RingVector {
        self.try_add(rhs).expect("ring vector lengths differ")
    }
}

impl<'a> Sub<&'a RingVector> for &'a RingVector {
    type Output = RingVector;
    fn sub(self, rhs: &'a RingVector) -> RingVector {
        self.try_sub(rhs).expect("ring vector lengths differ")
    }
}

impl AddAssign<&RingVector> for RingVector {
    fn add_assign(&mut self, rhs: &RingVector) {
        assert_eq!(self.len(), rhs.len(), "ring vector lengths differ");
        for (a, b) in self.0.iter_mut().zip(&rhs.0) {
            *a = a.wrapping_add(*b);
        }
    }
}

impl SubAssign<&RingVector> for RingVector {
    fn sub_assign(&mut self, rhs: &RingVector) {
        assert_eq!(self.len(), rhs.len(), "ring vector lengths differ");
        for (a, b) in self.0.iter_mut().zip(&rhs.0) {
            *a = a.wrapping_sub(*b);
        }
    }
}

impl Neg for &RingVector {
    type Output = RingVector;
    fn neg(self) -> RingVector {
        RingVector(self.0.iter().map(|a| a.wrapping_neg()).collect())
    }
}

/// Fixed-point scale and per-coordinate saturation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizationConfig {
    pub scale: u64,
    pub bound: f64,
}

impl Default for QuantizationConfig {
    fn default() -> Self {
        QuantizationConfig {
            scale: 1_000_000,
            bound: 100.0,
        }
    }
}

impl QuantizationConfig {
    /// Checks `max_cohort * scale * bound < q/2`, so that the modular sum of
    /// a full cohort of in-bound vectors still lifts to the right integer.
    pub fn validate(&self, max_cohort: usize) -> Result<(), VectorError> {
        if self.scale == 0 {
            return Err(VectorError::InvalidQuantization("scale must be positive".into()));
        }
        if !(self.bound.is_finite() && self.bound > 0.0) {
            return Err(VectorError::InvalidQuantization(
                "bound must be a positive real".into(),
            ));
        }
        let worst = max_cohort as f64 * self.scale as f64 * self.bound;
        if worst >= HALF_MODULUS as f64 {
            return Err(VectorError::InvalidQuantization(format!(
                "cohort {max_cohort} x scale {} x bound {} = {worst} is not below q/2 = {HALF_MODULUS}",
                self.scale, self.bound
            )));
        }
        Ok(())
    }
}

/// Encode reals as ring residues: `round(Q * v)` (half away from zero) with
/// negative values wrapped to `q + x`.
pub fn quantize(v: &ParameterVector, cfg: &QuantizationConfig) -> Result<RingVector, VectorError> {
    let q = cfg.scale as f64;
    v.0.iter()
        .enumerate()
        .map(|(index, &x)| {
            let scaled = (q * x).round();
            if !x.is_finite() || x.abs() > cfg.bound || scaled.abs() >= HALF_MODULUS as f64 {
                return Err(VectorError::Saturation {
                    index,
                    value: x,
                    scale: cfg.scale,
                    bound: cfg.bound,
                });
            }
            Ok((scaled as i64) as u32)
        })
        .collect::<Result<Vec<_>, _>>()
        .map(RingVector)
}

/// Centered lift of each word to `(-q/2, q/2]`, then divide by the scale.
pub fn dequantize(r: &RingVector, scale: u64) -> ParameterVector {
    let q = scale as f64;
    ParameterVector(r.0.iter().map(|&w| centered(w) as f64 / q).collect())
}

/// Signed integer represented by a ring word.
pub fn centered(w: u32) -> i64 {
    if (w as u64) < HALF_MODULUS {
        w as i64
    } else {
        w as i64 - (1i64 << 32)
    }
}

pub fn l2_norm(v: &ParameterVector) -> f64 {
    v.0.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &ParameterVector, b: &ParameterVector) -> Result<f64, VectorError> {
    let dot = a.dot(b)?;
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Median of a scalar sample; the mean of the two central values for even
/// counts. `None` on empty input.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

/// Number of values dropped from each tail by [`trimmed_mean`].
pub fn trim_count(n: usize, alpha: f64) -> usize {
    (alpha * n as f64).floor() as usize
}

/// Coordinate-wise trimmed mean: per coordinate drop the `floor(alpha * n)`
/// largest and smallest values and average the rest.
pub fn trimmed_mean(updates: &[ParameterVector], alpha: f64) -> Result<ParameterVector, VectorError> {
    let first = updates.first().ok_or(VectorError::EmptyInput)?;
    if !(0.0..0.5).contains(&alpha) {
        return Err(VectorError::InvalidTrimFraction(alpha));
    }
    let m = first.len();
    for u in updates {
        check_len(m, u.len())?;
    }
    let n = updates.len();
    let k = trim_count(n, alpha);
    let kept = (n - 2 * k) as f64;
    let mut column = Vec::with_capacity(n);
    let out = (0..m)
        .map(|c| {
            column.clear();
            column.extend(updates.iter().map(|u| u.0[c]));
            column.sort_by(f64::total_cmp);
            column[k..n - k].iter().sum::<f64>() / kept
        })
        .collect();
    Ok(ParameterVector(out))
}

pub(crate) fn check_len(left: usize, right: usize) -> Result<(), VectorError> {
    if left == right {
        Ok(())
    } else {
        Err(VectorError::LengthMismatch { left, right })
    }
}
