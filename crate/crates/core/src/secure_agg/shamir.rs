//! Shamir sharing of 32-byte secrets over GF(2^61 - 1).
//!
//! A secret is split into five little-endian bit chunks: four of 52 bits and
//! a final one of 48 bits. Each chunk is shared with its own polynomial.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SecureAggError;
use crate::seed;

pub const FIELD_PRIME: u64 = (1 << 61) - 1;
pub const CHUNKS: usize = 5;
const CHUNK_BITS: usize = 52;
/// Encoded share: `x` as 2 bytes, then each chunk as 8 bytes, little-endian.
pub const SHARE_BYTES: usize = 2 + 8 * CHUNKS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShamirConfig {
    /// Participants `N`.
    pub participants: usize,
    /// Tolerated dropouts `D`.
    pub max_dropouts: usize,
}

impl ShamirConfig {
    pub fn new(participants: usize, max_dropouts: usize) -> Result<Self, SecureAggError> {
        let cfg = ShamirConfig {
            participants,
            max_dropouts,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `k = N - D`.
    pub fn threshold(&self) -> usize {
        self.participants.saturating_sub(self.max_dropouts)
    }

    pub fn validate(&self) -> Result<(), SecureAggError> {
        if self.participants == 0 || self.participants > u16::MAX as usize {
            return Err(SecureAggError::InvalidConfig(format!(
                "participants must be in 1..=65535, got {}",
                self.participants
            )));
        }
        if self.max_dropouts >= self.participants {
            return Err(SecureAggError::InvalidConfig(format!(
                "max_dropouts {} leaves no threshold for {} participants",
                self.max_dropouts, self.participants
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Share {
    pub x: u16,
    pub chunks: [u64; CHUNKS],
}

impl Share {
    pub fn to_bytes(&self) -> [u8; SHARE_BYTES] {
        let mut out = [0u8; SHARE_BYTES];
        out[..2].copy_from_slice(&self.x.to_le_bytes());
        for (c, v) in self.chunks.iter().enumerate() {
            out[2 + 8 * c..10 + 8 * c].copy_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SecureAggError> {
        if bytes.len() != SHARE_BYTES {
            return Err(SecureAggError::MalformedShare(format!(
                "expected {SHARE_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let x = u16::from_le_bytes([bytes[0], bytes[1]]);
        let mut chunks = [0u64; CHUNKS];
        for (c, v) in chunks.iter_mut().enumerate() {
            *v = u64::from_le_bytes(bytes[2 + 8 * c..10 + 8 * c].try_into().expect("8 bytes"));
            if *v >= FIELD_PRIME {
                return Err(SecureAggError::MalformedShare(format!("chunk {c} not a field element")));
            }
        }
        if x == 0 {
            return Err(SecureAggError::MalformedShare("x = 0 is the secret point".into()));
        }
        Ok(Share { x, chunks })
    }
}

fn add(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= FIELD_PRIME {
        s - FIELD_PRIME
    } else {
        s
    }
}

fn sub(a: u64, b: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + FIELD_PRIME - b
    }
}

fn mul(a: u64, b: u64) -> u64 {
    let p = a as u128 * b as u128;
    // 2^61 = 1 (mod p)
    let folded = (p & FIELD_PRIME as u128) as u64 + (p >> 61) as u64;
    let folded = (folded & FIELD_PRIME) + (folded >> 61);
    if folded >= FIELD_PRIME {
        folded - FIELD_PRIME
    } else {
        folded
    }
}

fn pow(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul(acc, base);
        }
        base = mul(base, base);
        exp >>= 1;
    }
    acc
}

fn inv(a: u64) -> u64 {
    pow(a, FIELD_PRIME - 2)
}

fn split_secret(secret: &[u8; 32]) -> [u64; CHUNKS] {
    let mut chunks = [0u64; CHUNKS];
    for (c, chunk) in chunks.iter_mut().enumerate() {
        for bit in 0..CHUNK_BITS {
            let pos = c * CHUNK_BITS + bit;
            if pos >= 256 {
                break;
            }
            if secret[pos / 8] >> (pos % 8) & 1 == 1 {
                *chunk |= 1 << bit;
            }
        }
    }
    chunks
}

fn join_secret(chunks: &[u64; CHUNKS]) -> Result<[u8; 32], SecureAggError> {
    let mut out = [0u8; 32];
    for (c, &chunk) in chunks.iter().enumerate() {
        let width = CHUNK_BITS.min(256 - c * CHUNK_BITS);
        if chunk >> width != 0 {
            return Err(SecureAggError::MalformedShare(format!(
                "reconstructed chunk {c} exceeds {width} bits"
            )));
        }
        for bit in 0..width {
            if chunk >> bit & 1 == 1 {
                let pos = c * CHUNK_BITS + bit;
                out[pos / 8] |= 1 << (pos % 8);
            }
        }
    }
    Ok(out)
}

/// Lagrange interpolation through `points` evaluated at `x`.
pub fn interpolate_at(points: &[(u64, u64)], x: u64) -> Result<u64, SecureAggError> {
    for (a, &(xa, _)) in points.iter().enumerate() {
        if points[..a].iter().any(|&(xb, _)| xb == xa) {
            return Err(SecureAggError::DuplicatePoint(xa as u16));
        }
    }
    let x = x % FIELD_PRIME;
    let mut acc = 0;
    for (a, &(xa, ya)) in points.iter().enumerate() {
        let mut num = 1;
        let mut den = 1;
        for (b, &(xb, _)) in points.iter().enumerate() {
            if a != b {
                num = mul(num, sub(x, xb));
                den = mul(den, sub(xa, xb));
            }
        }
        acc = add(acc, mul(ya, mul(num, inv(den))));
    }
    Ok(acc)
}

/// Split `secret` into `N` shares at `x = 1..=N`; any `k` of them reconstruct it.
pub fn shamir_share(secret: &[u8; 32], cfg: &ShamirConfig, seed: u64) -> Result<Vec<Share>, SecureAggError> {
    cfg.validate()?;
    let k = cfg.threshold();
    let mut rng = seed::rng(seed, "shamir", &[]);
    let chunks = split_secret(secret);
    let polys: Vec<Vec<u64>> = chunks
        .iter()
        .map(|&c| {
            let mut coeffs = vec![c];
            coeffs.extend((1..k).map(|_| rng.gen_range(0..FIELD_PRIME)));
            coeffs
        })
        .collect();
    Ok((1..=cfg.participants as u64)
        .map(|x| {
            let mut out = [0u64; CHUNKS];
            for (o, coeffs) in out.iter_mut().zip(&polys) {
                *o = coeffs.iter().rev().fold(0, |acc, &c| add(mul(acc, x), c));
            }
            Share { x: x as u16, chunks: out }
        })
        .collect())
}

/// Recover the secret from at least `k` shares. Only the first `k` are used.
pub fn shamir_reconstruct(shares: &[Share], cfg: &ShamirConfig) -> Result<[u8; 32], SecureAggError> {
    cfg.validate()?;
    for (a, s) in shares.iter().enumerate() {
        if shares[..a].iter().any(|t| t.x == s.x) {
            return Err(SecureAggError::DuplicatePoint(s.x));
        }
    }
    let k = cfg.threshold();
    if shares.len() < k {
        return Err(SecureAggError::InsufficientShares {
            needed: k,
            got: shares.len(),
        });
    }
    let used = &shares[..k];
    let mut chunks = [0u64; CHUNKS];
    for (c, out) in chunks.iter_mut().enumerate() {
        let points: Vec<(u64, u64)> = used.iter().map(|s| (s.x as u64, s.chunks[c])).collect();
        *out = interpolate_at(&points, 0)?;
    }
    join_secret(&chunks)
}
