use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{AggError, ClientRecord};
use crate::seed;
use crate::ClientId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub cohort_size: usize,
    pub top_fraction: f64,
    pub random_fraction: f64,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            cohort_size: 20,
            top_fraction: 0.7,
            random_fraction: 0.3,
            seed: 0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self, population: usize) -> Result<(), AggError> {
        if self.cohort_size == 0 || self.cohort_size > population {
            return Err(AggError::InvalidConfig(format!(
                "cohort size {} must be in 1..={population}",
                self.cohort_size
            )));
        }
        let ok = |f: f64| (0.0..=1.0).contains(&f);
        if !ok(self.top_fraction)
            || !ok(self.random_fraction)
            || (self.top_fraction + self.random_fraction - 1.0).abs() > 1e-9
        {
            return Err(AggError::InvalidConfig(format!(
                "top_fraction {} and random_fraction {} must be in [0, 1] and sum to 1",
                self.top_fraction, self.random_fraction
            )));
        }
        Ok(())
    }

    /// `floor(top_fraction * cohort_size)`.
    pub fn top_count(&self) -> usize {
        ((self.top_fraction * self.cohort_size as f64) + 1e-9).floor() as usize
    }
}

/// Stratified cohort: the `top_count` highest-reputation clients (ties to
/// the lower id) plus a uniform sample of the rest, seeded by round.
/// Returned in ascending id order.
pub fn select_clients(records: &[ClientRecord], cfg: &SelectionConfig, round: u64) -> Vec<ClientId> {
    let size = cfg.cohort_size.min(records.len());
    let k_top = cfg.top_count().min(size);
    let mut ranked: Vec<&ClientRecord> = records.iter().collect();
    ranked.sort_by(|a, b| b.reputation.total_cmp(&a.reputation).then(a.id.cmp(&b.id)));
    let mut cohort: Vec<ClientId> = ranked[..k_top].iter().map(|r| r.id).collect();
    let mut rest: Vec<ClientId> = ranked[k_top..].iter().map(|r| r.id).collect();
    rest.sort_unstable();
    let mut rng = seed::rng(cfg.seed, "select", &[round]);
    let picks = index::sample(&mut rng, rest.len(), size - k_top);
    cohort.extend(picks.into_iter().map(|i| rest[i]));
    cohort.sort_unstable();
    cohort
}
