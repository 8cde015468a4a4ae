use std::collections::{BTreeMap, BTreeSet};

use super::kem::{kem_decaps, kem_encaps, Ciphertext, KemKeyPair, KemSuite};
use super::SecureAggError;
use crate::seed;
use crate::ClientId;

/// 32-byte pairwise shared secret, fixed for the lifetime of the federation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairwiseSeed(pub [u8; 32]);

#[derive(Debug, Clone)]
pub struct ClientKeys {
    pub id: ClientId,
    pub keys: KemKeyPair,
}

/// Each client's own view of its pairwise seeds: `owner -> peer -> seed`.
///
/// After an untampered handshake both endpoints hold the same seed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeedTable {
    views: BTreeMap<ClientId, BTreeMap<ClientId, PairwiseSeed>>,
}

impl SeedTable {
    pub fn new() -> Self {
        SeedTable::default()
    }

    pub fn insert(&mut self, owner: ClientId, peer: ClientId, seed: PairwiseSeed) {
        self.views.entry(owner).or_default().insert(peer, seed);
    }

    pub fn get(&self, owner: ClientId, peer: ClientId) -> Option<&PairwiseSeed> {
        self.views.get(&owner).and_then(|v| v.get(&peer))
    }

    pub fn require(&self, owner: ClientId, peer: ClientId) -> Result<&PairwiseSeed, SecureAggError> {
        self.get(owner, peer).ok_or(SecureAggError::MissingSeed {
            owner: owner.0,
            peer: peer.0,
        })
    }

    /// Seeds held by one client.
    pub fn view(&self, owner: ClientId) -> Option<&BTreeMap<ClientId, PairwiseSeed>> {
        self.views.get(&owner)
    }

    /// Unordered pairs `(i, j)`, `i < j`, with a seed on at least one side.
    pub fn pairs(&self) -> BTreeSet<(ClientId, ClientId)> {
        self.views
            .iter()
            .flat_map(|(&a, peers)| peers.keys().map(move |&b| (a.min(b), a.max(b))))
            .collect()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs().len()
    }

    /// Pairs whose two endpoints disagree or where one side is missing.
    pub fn mismatched_pairs(&self) -> Vec<(ClientId, ClientId)> {
        self.pairs()
            .into_iter()
            .filter(|&(i, j)| match (self.get(i, j), self.get(j, i)) {
                (Some(a), Some(b)) => a != b,
                _ => true,
            })
            .collect()
    }
}

/// Run the handshake for every pair of `clients`.
pub fn establish_pairwise_seeds(
    clients: &[ClientKeys],
    suite: KemSuite,
    master_seed: u64,
) -> Result<SeedTable, SecureAggError> {
    establish_pairwise_seeds_via(clients, suite, master_seed, |_, _, _| {})
}

/// Handshake with a hook on each ciphertext in transit from the lower id to
/// the higher id. The hook may rewrite the ciphertext, which models a
/// tampering channel.
pub fn establish_pairwise_seeds_via<F>(
    clients: &[ClientKeys],
    suite: KemSuite,
    master_seed: u64,
    mut channel: F,
) -> Result<SeedTable, SecureAggError>
where
    F: FnMut(ClientId, ClientId, &mut Ciphertext),
{
    let mut sorted: Vec<&ClientKeys> = clients.iter().collect();
    sorted.sort_by_key(|c| c.id);
    for w in sorted.windows(2) {
        if w[0].id == w[1].id {
            return Err(SecureAggError::DuplicateClient(w[0].id.0));
        }
    }
    let mut table = SeedTable::new();
    for (a, lower) in sorted.iter().enumerate() {
        for higher in &sorted[a + 1..] {
            let randomness = seed::derive_bytes(
                master_seed,
                "kem-encaps",
                &[lower.id.0 as u64, higher.id.0 as u64],
            );
            let (mut ct, ss_lower) = kem_encaps(suite, &higher.keys.public, &randomness)?;
            channel(lower.id, higher.id, &mut ct);
            let ss_higher = kem_decaps(suite, &ct, &higher.keys.secret)?;
            table.insert(lower.id, higher.id, PairwiseSeed(ss_lower.0));
            table.insert(higher.id, lower.id, PairwiseSeed(ss_higher.0));
        }
    }
    Ok(table)
}
