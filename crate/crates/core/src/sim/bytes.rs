//! Per-client communication accounting.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::secure_agg::SHARE_BYTES;

/// Bytes one client moves in one round.
///
/// `kem_pk` and `kem_ct` are setup-only items sent once per run. They are
/// listed for reference and left out of [`ByteCounts::per_round`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ByteCounts {
    pub model_down: u64,
    pub masked_up: u64,
    pub kem_pk: u64,
    pub kem_ct: u64,
    pub shares: u64,
}

impl ByteCounts {
    /// Recurring traffic: download, upload and seed shares.
    pub fn per_round(&self) -> u64 {
        self.model_down + self.masked_up + self.shares
    }

    pub fn total(&self) -> u64 {
        self.per_round() + self.kem_pk + self.kem_ct
    }
}

impl Add for ByteCounts {
    type Output = ByteCounts;

    fn add(self, o: ByteCounts) -> ByteCounts {
        ByteCounts {
            model_down: self.model_down + o.model_down,
            masked_up: self.masked_up + o.masked_up,
            kem_pk: self.kem_pk + o.kem_pk,
            kem_ct: self.kem_ct + o.kem_ct,
            shares: self.shares + o.shares,
        }
    }
}

impl AddAssign for ByteCounts {
    fn add_assign(&mut self, o: ByteCounts) {
        *self = *self + o;
    }
}

/// Where a client stands in a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundContext {
    pub param_count: usize,
    pub cohort_size: usize,
    pub participated: bool,
    pub dropped: bool,
}

/// Byte table for one client.
///
/// Parameters travel as 32-bit words both ways. In the masked modes a
/// participant also Shamir-shares each of its `|S| - 1` in-cohort seeds into
/// `|S|` shares of `SHARE_BYTES` each. A dropped client downloads and shares
/// but never uploads.
pub fn account_bytes(cfg: &ScenarioConfig, ctx: &RoundContext) -> ByteCounts {
    if !ctx.participated {
        return ByteCounts::default();
    }
    let words = 4 * ctx.param_count as u64;
    let masked = cfg.federation.mode.is_masked();
    let suite = cfg.federation.kem;
    let s = ctx.cohort_size as u64;
    ByteCounts {
        model_down: words,
        masked_up: if ctx.dropped { 0 } else { words },
        kem_pk: if masked { suite.public_key_len() as u64 } else { 0 },
        kem_ct: if masked { suite.ciphertext_len() as u64 } else { 0 },
        shares: if masked {
            s.saturating_sub(1) * s * SHARE_BYTES as u64
        } else {
            0
        },
    }
}

/// One-off handshake traffic for the whole federation: every client
/// publishes a key and every pair exchanges one ciphertext.
pub fn setup_bytes(cfg: &ScenarioConfig) -> u64 {
    if !cfg.federation.mode.is_masked() {
        return 0;
    }
    let n = cfg.federation.clients as u64;
    let suite = cfg.federation.kem;
    n * suite.public_key_len() as u64 + n * (n - 1) / 2 * suite.ciphertext_len() as u64
}
