use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::seeds::{PairwiseSeed, SeedTable};
use super::SecureAggError;
use crate::vectors::{dequantize, ParameterVector, RingVector};
use crate::ClientId;

/// Pairwise mask for `round`: word `k` is bytes `4(k mod 8)..` of block
/// `k / 8`, little-endian, where block `b = SHA-256(seed || round_le64 || b_le64)`.
pub fn expand_mask(seed: &PairwiseSeed, round: u64, len: usize) -> RingVector {
    let mut words = Vec::with_capacity(len);
    let mut block = 0u64;
    while words.len() < len {
        let digest = Sha256::new()
            .chain_update(seed.0)
            .chain_update(round.to_le_bytes())
            .chain_update(block.to_le_bytes())
            .finalize();
        for chunk in digest.chunks_exact(4) {
            if words.len() == len {
                break;
            }
            words.push(u32::from_le_bytes(chunk.try_into().expect("4 bytes")));
        }
        block += 1;
    }
    RingVector(words)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedUpdate {
    pub client: ClientId,
    pub round: u64,
    pub words: RingVector,
}

/// `u_i = q_i + sum_{j > i} m_ij - sum_{j < i} m_ji (mod 2^32)` over the
/// in-cohort peers of `id`, using the seeds held by `id`.
pub fn mask_update(
    quantized: &RingVector,
    id: ClientId,
    seeds: &SeedTable,
    cohort: &[ClientId],
    round: u64,
) -> Result<MaskedUpdate, SecureAggError> {
    let mut words = quantized.clone();
    for &peer in cohort {
        if peer == id {
            continue;
        }
        let mask = expand_mask(seeds.require(id, peer)?, round, quantized.len());
        if id < peer {
            words += &mask;
        } else {
            words -= &mask;
        }
    }
    Ok(MaskedUpdate {
        client: id,
        round,
        words,
    })
}

/// Modular sum of the masked updates, minus `residual` when given.
pub fn unmask_ring(
    masked: &[MaskedUpdate],
    residual: Option<&RingVector>,
) -> Result<RingVector, SecureAggError> {
    let first = masked.first().ok_or(SecureAggError::EmptyInput)?;
    let len = first.words.len();
    let mut acc = RingVector::zeros(len);
    for u in masked {
        if u.round != first.round {
            return Err(SecureAggError::RoundMismatch(first.round, u.round));
        }
        if u.words.len() != len {
            return Err(SecureAggError::LengthMismatch {
                expected: len,
                got: u.words.len(),
            });
        }
        acc += &u.words;
    }
    if let Some(r) = residual {
        if r.len() != len {
            return Err(SecureAggError::LengthMismatch {
                expected: len,
                got: r.len(),
            });
        }
        acc -= r;
    }
    Ok(acc)
}

/// Unmasked aggregate in real units: [`unmask_ring`], centered lift, divide by `scale`.
pub fn unmask_aggregate(
    masked: &[MaskedUpdate],
    scale: u64,
    residual: Option<&RingVector>,
) -> Result<ParameterVector, SecureAggError> {
    Ok(dequantize(&unmask_ring(masked, residual)?, scale))
}
