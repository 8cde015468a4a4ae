//! Standalone masking self-check behind `pqfl verify-masking`.

use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use crate::secure_agg::{
    establish_pairwise_seeds, kem_keygen, mask_update, recover_dropout_residual, reconstruct_client_seeds,
    share_client_seeds, unmask_ring, ClientKeys, KemSuite, MaskedUpdate, SecureAggError,
};
use crate::seed;
use crate::vectors::RingVector;
use crate::ClientId;

/// Test hook: add one to `word` of `client`'s masked update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskFault {
    pub client: usize,
    pub word: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckKind {
    Cancellation,
    DropoutRecovery,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MaskingFailure {
    pub trial: usize,
    pub check: CheckKind,
    pub coordinate: usize,
    pub expected: u32,
    pub got: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MaskingReport {
    pub clients: usize,
    pub dim: usize,
    pub trials: usize,
    pub max_dropouts: usize,
    pub failures: usize,
    pub first_failure: Option<MaskingFailure>,
}

impl MaskingReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn first_mismatch(expected: &RingVector, got: &RingVector) -> Option<(usize, u32, u32)> {
    expected
        .words()
        .iter()
        .zip(got.words())
        .enumerate()
        .find(|(_, (a, b))| a != b)
        .map(|(k, (&a, &b))| (k, a, b))
}

/// For each trial: fresh random updates and round, check that the masked
/// sum equals the plain sum, then drop a random subset of at most
/// `min(2, N - 1)` clients and check the recovered sum over the survivors.
pub fn verify_masking(
    clients: usize,
    dim: usize,
    trials: usize,
    master_seed: u64,
    fault: Option<MaskFault>,
) -> Result<MaskingReport, SecureAggError> {
    if clients < 2 {
        return Err(SecureAggError::InvalidConfig("verify-masking needs at least 2 clients".into()));
    }
    let ids: Vec<ClientId> = (0..clients as u32).map(ClientId).collect();
    let keys: Vec<ClientKeys> = ids
        .iter()
        .map(|&id| ClientKeys {
            id,
            keys: kem_keygen(KemSuite::MockKem, &seed::derive_bytes(master_seed, "verify-keygen", &[id.0 as u64])),
        })
        .collect();
    let table = establish_pairwise_seeds(&keys, KemSuite::MockKem, master_seed)?;
    let max_dropouts = 2.min(clients - 1);
    let mut report = MaskingReport {
        clients,
        dim,
        trials,
        max_dropouts,
        failures: 0,
        first_failure: None,
    };
    let fail = |report: &mut MaskingReport, trial, check, (coordinate, expected, got)| {
        report.failures += 1;
        report.first_failure.get_or_insert(MaskingFailure {
            trial,
            check,
            coordinate,
            expected,
            got,
        });
    };
    let mut rng = seed::rng(master_seed, "verify-masking", &[]);
    for trial in 0..trials {
        let round: u64 = rng.gen();
        let quantized: Vec<RingVector> = (0..clients).map(|_| RingVector((0..dim).map(|_| rng.gen()).collect())).collect();
        let mut masked: Vec<MaskedUpdate> = ids
            .iter()
            .zip(&quantized)
            .map(|(&id, q)| mask_update(q, id, &table, &ids, round))
            .collect::<Result<_, _>>()?;
        if let Some(f) = fault {
            if let Some(w) = masked.get_mut(f.client).and_then(|u| u.words.0.get_mut(f.word)) {
                *w = w.wrapping_add(1);
            }
        }
        let direct = RingVector::sum(dim, &quantized)?;
        if let Some(m) = first_mismatch(&direct, &unmask_ring(&masked, None)?) {
            fail(&mut report, trial, CheckKind::Cancellation, m);
        }

        let drop_count = rng.gen_range(1..=max_dropouts);
        let dropped: Vec<usize> = index::sample(&mut rng, clients, drop_count).into_vec();
        let survivors: Vec<ClientId> = ids.iter().copied().filter(|c| !dropped.contains(&c.index())).collect();
        let shares = share_client_seeds(&table, &ids, max_dropouts, rng.gen(), round)?;
        let mut residual = RingVector::zeros(dim);
        for &d in &dropped {
            let rebuilt = reconstruct_client_seeds(&shares, ids[d], &survivors)?;
            residual += &recover_dropout_residual(ids[d], &survivors, &rebuilt, round, dim)?;
        }
        let uploads: Vec<MaskedUpdate> = masked.into_iter().filter(|u| !dropped.contains(&u.client.index())).collect();
        let expected = RingVector::sum(dim, survivors.iter().map(|c| &quantized[c.index()]))?;
        if let Some(m) = first_mismatch(&expected, &unmask_ring(&uploads, Some(&residual))?) {
            fail(&mut report, trial, CheckKind::DropoutRecovery, m);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape_passes() {
        let r = verify_masking(5, 32, 50, 1, None).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn small_sweep_passes() {
        for n in 2..=8 {
            assert!(verify_masking(n, 4, 20, n as u64, None).unwrap().passed());
        }
    }

    #[test]
    fn injected_fault_is_located() {
        let r = verify_masking(4, 16, 5, 2, Some(MaskFault { client: 1, word: 7 })).unwrap();
        assert!(!r.passed());
        let f = r.first_failure.unwrap();
        assert_eq!(f.check, CheckKind::Cancellation);
        assert_eq!(f.coordinate, 7);
        assert_eq!(f.got, f.expected.wrapping_add(1));
    }

    #[test]
    fn needs_two_clients() {
        assert!(verify_masking(1, 4, 1, 0, None).is_err());
    }
}
