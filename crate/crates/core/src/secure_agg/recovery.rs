//! Dropout recovery: clients Shamir-share their pairwise seeds within the
//! cohort so the server can rebuild a dropped client's masks.

use std::collections::BTreeMap;

use super::mask::expand_mask;
use super::seeds::{PairwiseSeed, SeedTable};
use super::shamir::{shamir_reconstruct, shamir_share, Share, ShamirConfig, SHARE_BYTES};
use super::SecureAggError;
use crate::seed;
use crate::vectors::RingVector;
use crate::ClientId;

/// Shares of every cohort member's in-cohort pairwise seeds.
///
/// Share `p` of each secret is held by `cohort[p]` and sits at `x = p + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedShares {
    pub config: ShamirConfig,
    pub cohort: Vec<ClientId>,
    /// `(owner, peer) -> N shares` of the seed `owner` holds for `peer`.
    pub shares: BTreeMap<(ClientId, ClientId), Vec<Share>>,
}

impl SeedShares {
    fn position(&self, id: ClientId) -> Option<usize> {
        self.cohort.iter().position(|&c| c == id)
    }

    /// Shares of `owner`'s seeds held by `holder`, keyed by peer.
    pub fn held_by(&self, holder: ClientId, owner: ClientId) -> BTreeMap<ClientId, Share> {
        let Some(p) = self.position(holder) else {
            return BTreeMap::new();
        };
        self.shares
            .range((owner, ClientId(0))..=(owner, ClientId(u32::MAX)))
            .map(|(&(_, peer), s)| (peer, s[p]))
            .collect()
    }

    pub fn secret_count(&self) -> usize {
        self.shares.len()
    }

    /// Encoded bytes of all shares, `SHARE_BYTES` each.
    pub fn byte_len(&self) -> usize {
        self.shares.values().map(|v| v.len() * SHARE_BYTES).sum()
    }
}

/// Share each cohort member's seed for each other cohort member, `k = |S| - D`.
pub fn share_client_seeds(
    seeds: &SeedTable,
    cohort: &[ClientId],
    max_dropouts: usize,
    master_seed: u64,
    round: u64,
) -> Result<SeedShares, SecureAggError> {
    let mut sorted = cohort.to_vec();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(SecureAggError::DuplicateClient(w[0].0));
    }
    let config = ShamirConfig::new(cohort.len(), max_dropouts)?;
    let mut shares = BTreeMap::new();
    for &owner in cohort {
        for &peer in cohort {
            if owner == peer {
                continue;
            }
            let secret = seeds.require(owner, peer)?;
            let share_seed = seed::derive(master_seed, "seed-shares", &[round, owner.0 as u64, peer.0 as u64]);
            shares.insert((owner, peer), shamir_share(&secret.0, &config, share_seed)?);
        }
    }
    Ok(SeedShares {
        config,
        cohort: cohort.to_vec(),
        shares,
    })
}

/// Rebuild `dropped`'s seeds for its in-cohort peers from the shares held by `survivors`.
pub fn reconstruct_client_seeds(
    shares: &SeedShares,
    dropped: ClientId,
    survivors: &[ClientId],
) -> Result<BTreeMap<ClientId, PairwiseSeed>, SecureAggError> {
    let held: Vec<BTreeMap<ClientId, Share>> = survivors
        .iter()
        .filter(|&&s| s != dropped)
        .map(|&s| shares.held_by(s, dropped))
        .collect();
    let mut out = BTreeMap::new();
    for &peer in &shares.cohort {
        if peer == dropped {
            continue;
        }
        let points: Vec<Share> = held.iter().filter_map(|h| h.get(&peer).copied()).collect();
        let secret = shamir_reconstruct(&points, &shares.config)?;
        out.insert(peer, PairwiseSeed(secret));
    }
    Ok(out)
}

/// Uncancelled mask terms left in the survivors' sum by the absence of `dropped`:
/// `R_j = sum_{i < j} m_ij - sum_{i > j} m_ji` over surviving `i`.
pub fn recover_dropout_residual(
    dropped: ClientId,
    survivors: &[ClientId],
    seeds: &BTreeMap<ClientId, PairwiseSeed>,
    round: u64,
    len: usize,
) -> Result<RingVector, SecureAggError> {
    let mut residual = RingVector::zeros(len);
    for &i in survivors {
        if i == dropped {
            continue;
        }
        let s = seeds.get(&i).ok_or(SecureAggError::MissingSeed {
            owner: dropped.0,
            peer: i.0,
        })?;
        let mask = expand_mask(s, round, len);
        if i < dropped {
            residual += &mask;
        } else {
            residual -= &mask;
        }
    }
    Ok(residual)
}
