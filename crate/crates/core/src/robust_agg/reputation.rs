use serde::{Deserialize, Serialize};

use super::{check_count, AggError};
use crate::vectors::{cosine, l2_norm, median, trimmed_mean, ParameterVector};
use crate::ClientId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReputationConfig {
    /// EMA weight on the previous reputation.
    pub gamma: f64,
    /// Per-tail trim fraction of the reference trimmed mean.
    pub trim_fraction: f64,
    pub tau_high: f64,
    pub tau_low: f64,
    /// Multiplier applied to the similarity of out-of-band magnitudes.
    pub penalty: f64,
}

impl Default for ReputationConfig {
    fn default() -> Self {
        ReputationConfig {
            gamma: 0.9,
            trim_fraction: 0.2,
            tau_high: 3.0,
            tau_low: 0.1,
            penalty: 0.5,
        }
    }
}

impl ReputationConfig {
    pub fn validate(&self) -> Result<(), AggError> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(AggError::InvalidConfig(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if !(0.0..0.5).contains(&self.trim_fraction) {
            return Err(AggError::InvalidConfig(format!(
                "trim_fraction {} outside [0, 0.5)",
                self.trim_fraction
            )));
        }
        if !(self.tau_low > 0.0 && self.tau_low < self.tau_high) {
            return Err(AggError::InvalidConfig(format!(
                "need 0 < tau_low ({}) < tau_high ({})",
                self.tau_low, self.tau_high
            )));
        }
        if !(0.0..=1.0).contains(&self.penalty) {
            return Err(AggError::InvalidConfig(format!("penalty {} outside [0, 1]", self.penalty)));
        }
        Ok(())
    }
}

/// One round of evidence about a client.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundScore {
    pub round: u64,
    pub sim: f64,
    pub mag: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientRecord {
    pub id: ClientId,
    /// Local dataset size `n_i`.
    pub samples: usize,
    /// Always in `[0, 1]`; starts at 1.
    pub reputation: f64,
    pub history: Vec<RoundScore>,
}

impl ClientRecord {
    pub fn new(id: ClientId, samples: usize) -> Self {
        ClientRecord {
            id,
            samples,
            reputation: 1.0,
            history: Vec::new(),
        }
    }
}

/// Scores of one participant for one round, with its updated reputation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientScore {
    pub id: ClientId,
    pub sim: f64,
    pub mag: f64,
    pub score: f64,
    pub reputation: f64,
}

/// `||update|| / median(all_norms)`, or 1 when the median is zero.
pub fn normalized_magnitude(update: &ParameterVector, all_norms: &[f64]) -> f64 {
    magnitude_from_norm(l2_norm(update), all_norms)
}

fn magnitude_from_norm(norm: f64, all_norms: &[f64]) -> f64 {
    match median(all_norms) {
        Some(m) if m > 0.0 => norm / m,
        _ => 1.0,
    }
}

/// Similarity, halved by `cfg.penalty` outside `[tau_low, tau_high]`, then
/// clamped to `[0, 1]`.
pub fn round_score(sim: f64, mag: f64, cfg: &ReputationConfig) -> f64 {
    let s = if (cfg.tau_low..=cfg.tau_high).contains(&mag) {
        sim
    } else {
        sim * cfg.penalty
    };
    s.clamp(0.0, 1.0)
}

pub fn update_reputation(r: f64, s: f64, gamma: f64) -> f64 {
    (gamma * r + (1.0 - gamma) * s).clamp(0.0, 1.0)
}

/// `(sim, mag, score)` for each update against the trimmed mean of the same
/// set of updates.
pub fn compute_scores(
    updates: &[ParameterVector],
    cfg: &ReputationConfig,
) -> Result<Vec<(f64, f64, f64)>, AggError> {
    if updates.is_empty() {
        return Err(AggError::EmptyInput);
    }
    let reference = trimmed_mean(updates, cfg.trim_fraction)?;
    let norms: Vec<f64> = updates.iter().map(l2_norm).collect();
    updates
        .iter()
        .zip(&norms)
        .map(|(u, &norm)| {
            let sim = cosine(u, &reference)?;
            let mag = magnitude_from_norm(norm, &norms);
            Ok((sim, mag, round_score(sim, mag, cfg)))
        })
        .collect()
}

/// Score the participants of `round` and fold the scores into their
/// reputations. Records of clients absent from `updates` are untouched.
pub fn score_round(
    round: u64,
    updates: &[(ClientId, ParameterVector)],
    records: &mut [ClientRecord],
    cfg: &ReputationConfig,
) -> Result<Vec<ClientScore>, AggError> {
    let vectors: Vec<ParameterVector> = updates.iter().map(|(_, u)| u.clone()).collect();
    let scores = compute_scores(&vectors, cfg)?;
    updates
        .iter()
        .zip(scores)
        .map(|((id, _), (sim, mag, score))| {
            let record = records
                .iter_mut()
                .find(|r| r.id == *id)
                .ok_or(AggError::UnknownClient(id.0))?;
            record.reputation = update_reputation(record.reputation, score, cfg.gamma);
            record.history.push(RoundScore {
                round,
                sim,
                mag,
                score,
            });
            Ok(ClientScore {
                id: *id,
                sim,
                mag,
                score,
                reputation: record.reputation,
            })
        })
        .collect()
}

/// Normalized aggregation weights `r_i n_i / sum_j r_j n_j`.
pub fn aggregation_weights(reputations: &[f64], sizes: &[usize]) -> Result<Vec<f64>, AggError> {
    if reputations.is_empty() {
        return Err(AggError::EmptyInput);
    }
    check_count("sizes", reputations.len(), sizes.len())?;
    let raw: Vec<f64> = reputations
        .iter()
        .zip(sizes)
        .map(|(r, &n)| r * n as f64)
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(AggError::AllZeroWeights);
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Reputation-weighted average `sum r_i n_i u_i / sum r_i n_i`, summed in
/// the given (ascending id) order.
pub fn aggregate_weighted(
    updates: &[ParameterVector],
    reputations: &[f64],
    sizes: &[usize],
) -> Result<ParameterVector, AggError> {
    check_count("reputations", updates.len(), reputations.len())?;
    let weights = aggregation_weights(reputations, sizes)?;
    weighted_sum(updates, &weights)
}

pub fn weighted_sum(updates: &[ParameterVector], weights: &[f64]) -> Result<ParameterVector, AggError> {
    let first = updates.first().ok_or(AggError::EmptyInput)?;
    let mut acc = ParameterVector::zeros(first.len());
    for (u, &w) in updates.iter().zip(weights) {
        acc.axpy(w, u)?;
    }
    Ok(acc)
}
