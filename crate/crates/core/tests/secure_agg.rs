//! Protocol-level checks of the KEM handshake and the masks.

use std::collections::BTreeSet;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use pqfl_core::secure_agg::{
    establish_pairwise_seeds, establish_pairwise_seeds_via, kem_keygen, mask_update, ClientKeys, KemSuite,
    SecureAggError,
};
use pqfl_core::seed;
use pqfl_core::{ClientId, RingVector};

fn keys(suite: KemSuite, n: u32, master: u64) -> Vec<ClientKeys> {
    (0..n)
        .map(|i| ClientKeys {
            id: ClientId(i),
            keys: kem_keygen(suite, &seed::derive_bytes(master, "test-keygen", &[i as u64])),
        })
        .collect()
}

#[test]
fn mlkem_public_keys_are_distinct() {
    let mut seen = BTreeSet::new();
    for i in 0..10_000u64 {
        let kp = kem_keygen(KemSuite::MlKem1024, &seed::derive_bytes(5, "distinct", &[i]));
        assert_eq!(kp.public.0.len(), 1568);
        assert!(seen.insert(kp.public.0), "repeated public key at {i}");
    }
}

#[test]
fn mlkem_handshake_agrees() {
    let table = establish_pairwise_seeds(&keys(KemSuite::MlKem1024, 5, 1), KemSuite::MlKem1024, 1).unwrap();
    assert_eq!(table.pair_count(), 10);
    assert!(table.mismatched_pairs().is_empty());
}

#[test]
fn corrupted_ciphertext_breaks_agreement() {
    let ks = keys(KemSuite::MlKem1024, 3, 2);
    let table = establish_pairwise_seeds_via(&ks, KemSuite::MlKem1024, 2, |lo, hi, ct| {
        if (lo, hi) == (ClientId(0), ClientId(2)) {
            ct.0[17] ^= 0x40;
        }
    })
    .unwrap();
    assert_eq!(table.mismatched_pairs(), vec![(ClientId(0), ClientId(2))]);
}

#[test]
fn masked_words_look_uniform() {
    let ids: Vec<ClientId> = (0..3).map(ClientId).collect();
    let table = establish_pairwise_seeds(&keys(KemSuite::MockKem, 3, 3), KemSuite::MockKem, 3).unwrap();
    let m = 1 << 16;
    let masked = mask_update(&RingVector::zeros(m), ClientId(1), &table, &ids, 4).unwrap();
    let mut bins = [0f64; 256];
    for w in masked.words.words() {
        bins[(w >> 24) as usize] += 1.0;
    }
    let expected = m as f64 / 256.0;
    let stat: f64 = bins.iter().map(|o| (o - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new(255.0).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi-square {stat} >= {critical}");
}

#[test]
fn masking_needs_every_pair_seed() {
    let ids: Vec<ClientId> = (0..3).map(ClientId).collect();
    let table = establish_pairwise_seeds(&keys(KemSuite::MockKem, 2, 6), KemSuite::MockKem, 6).unwrap();
    let err = mask_update(&RingVector::zeros(4), ClientId(0), &table, &ids, 0).unwrap_err();
    assert!(matches!(err, SecureAggError::MissingSeed { .. }), "{err:?}");
}
