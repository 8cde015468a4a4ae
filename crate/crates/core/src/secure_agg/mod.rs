//! Pairwise-masking secure aggregation keyed by a post-quantum KEM.
//!
//! Each client pair `(i, j)`, `i < j`, agrees on a 32-byte seed: the lower id
//! encapsulates to the higher id's public key. Per round, the seed expands
//! into a mask over `Z_{2^32}` that the lower id adds and the higher id
//! subtracts, so masks cancel in the cohort sum. Clients Shamir-share their
//! pairwise seeds within the cohort; when a client drops out, the survivors'
//! shares let the server rebuild the dropped client's seeds and subtract the
//! masks its absence left uncancelled.
//!
//! No self-mask is used, so recovering a dropped client's seeds reveals that
//! client's masks to the server.

mod kem;
mod mask;
mod recovery;
mod seeds;
mod shamir;

pub use kem::{
    kem_decaps, kem_encaps, kem_keygen, Ciphertext, KemKeyPair, KemSuite, PublicKey, SecretKey,
    SharedSecret,
};
pub use mask::{expand_mask, mask_update, unmask_aggregate, unmask_ring, MaskedUpdate};
pub use recovery::{recover_dropout_residual, reconstruct_client_seeds, share_client_seeds, SeedShares};
pub use seeds::{
    establish_pairwise_seeds, establish_pairwise_seeds_via, ClientKeys, PairwiseSeed, SeedTable,
};
pub use shamir::{
    interpolate_at, shamir_reconstruct, shamir_share, Share, ShamirConfig, CHUNKS, FIELD_PRIME,
    SHARE_BYTES,
};

use thiserror::Error;

use crate::vectors::VectorError;

#[derive(Debug, Error, PartialEq)]
pub enum SecureAggError {
    #[error("decapsulation failed: {0}")]
    DecapsFailure(String),
    #[error("malformed {what}: expected {expected} bytes, got {got}")]
    MalformedKey {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("no pairwise seed held by client {owner} for peer {peer}")]
    MissingSeed { owner: u32, peer: u32 },
    #[error("masked updates from different rounds ({0} and {1})")]
    RoundMismatch(u64, u64),
    #[error("masked update length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no masked updates")]
    EmptyInput,
    #[error("duplicate client id {0}")]
    DuplicateClient(u32),
    #[error("need {needed} shares, got {got}")]
    InsufficientShares { needed: usize, got: usize },
    #[error("duplicate share point x = {0}")]
    DuplicatePoint(u16),
    #[error("malformed share: {0}")]
    MalformedShare(String),
    #[error("invalid shamir config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Vector(#[from] VectorError),
}
