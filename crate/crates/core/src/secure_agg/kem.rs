//! KEM suites: ML-KEM-1024 (via the `ml-kem` crate) and a hash-based mock.
//!
//! The mock is deterministic and offers no security. It exists so protocol
//! tests run bit-reproducibly and fast.

use ml_kem::kem::{Decapsulate, DecapsulationKey, Encapsulate, EncapsulationKey};
use ml_kem::{Encoded, EncodedSizeUser, KemCore, MlKem1024, MlKem1024Params};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SecureAggError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KemSuite {
    #[serde(rename = "ml-kem-1024")]
    MlKem1024,
    #[serde(rename = "mock")]
    MockKem,
}

impl KemSuite {
    pub fn name(self) -> &'static str {
        match self {
            KemSuite::MlKem1024 => "ML-KEM-1024",
            KemSuite::MockKem => "MockKEM",
        }
    }

    pub fn public_key_len(self) -> usize {
        match self {
            KemSuite::MlKem1024 => 1568,
            KemSuite::MockKem => 32,
        }
    }

    pub fn secret_key_len(self) -> usize {
        match self {
            KemSuite::MlKem1024 => 3168,
            KemSuite::MockKem => 32,
        }
    }

    pub fn ciphertext_len(self) -> usize {
        match self {
            KemSuite::MlKem1024 => 1568,
            KemSuite::MockKem => 32,
        }
    }

    pub fn shared_secret_len(self) -> usize {
        32
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey(pub Vec<u8>);

#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey(pub Vec<u8>);

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SecretKey({} bytes)", self.0.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext(pub Vec<u8>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SharedSecret(pub [u8; 32]);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KemKeyPair {
    pub public: PublicKey,
    pub secret: SecretKey,
}

fn tagged_hash(tag: &[u8], parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(tag);
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

fn expect_len(what: &'static str, bytes: &[u8], expected: usize) -> Result<(), SecureAggError> {
    if bytes.len() != expected {
        return Err(SecureAggError::MalformedKey {
            what,
            expected,
            got: bytes.len(),
        });
    }
    Ok(())
}

/// Key pair derived deterministically from `seed`.
pub fn kem_keygen(suite: KemSuite, seed: &[u8; 32]) -> KemKeyPair {
    match suite {
        KemSuite::MlKem1024 => {
            let mut rng = ChaCha20Rng::from_seed(*seed);
            let (dk, ek) = MlKem1024::generate(&mut rng);
            KemKeyPair {
                public: PublicKey(ek.as_bytes().to_vec()),
                secret: SecretKey(dk.as_bytes().to_vec()),
            }
        }
        KemSuite::MockKem => KemKeyPair {
            public: PublicKey(tagged_hash(b"mockkem-pk", &[seed]).to_vec()),
            secret: SecretKey(seed.to_vec()),
        },
    }
}

/// Encapsulate to `pk` using the 32 bytes of `randomness`.
pub fn kem_encaps(
    suite: KemSuite,
    pk: &PublicKey,
    randomness: &[u8; 32],
) -> Result<(Ciphertext, SharedSecret), SecureAggError> {
    expect_len("public key", &pk.0, suite.public_key_len())?;
    match suite {
        KemSuite::MlKem1024 => {
            let encoded = Encoded::<EncapsulationKey<MlKem1024Params>>::try_from(pk.0.as_slice())
                .map_err(|_| SecureAggError::MalformedKey {
                    what: "public key",
                    expected: suite.public_key_len(),
                    got: pk.0.len(),
                })?;
            let ek = EncapsulationKey::<MlKem1024Params>::from_bytes(&encoded);
            let mut rng = ChaCha20Rng::from_seed(*randomness);
            let (ct, ss) = ek
                .encapsulate(&mut rng)
                .map_err(|_| SecureAggError::DecapsFailure("encapsulation failed".into()))?;
            let mut secret = [0u8; 32];
            secret.copy_from_slice(&ss);
            Ok((Ciphertext(ct.to_vec()), SharedSecret(secret)))
        }
        KemSuite::MockKem => {
            let ct = tagged_hash(b"mockkem-ct", &[&pk.0, randomness]);
            let ss = tagged_hash(b"mockkem-ss", &[&pk.0, &ct]);
            Ok((Ciphertext(ct.to_vec()), SharedSecret(ss)))
        }
    }
}

/// Recover the shared secret from `ct`. ML-KEM uses implicit rejection, so a
/// tampered but well-formed ciphertext yields an unrelated secret rather
/// than an error.
pub fn kem_decaps(suite: KemSuite, ct: &Ciphertext, sk: &SecretKey) -> Result<SharedSecret, SecureAggError> {
    let malformed = |e: SecureAggError| SecureAggError::DecapsFailure(e.to_string());
    expect_len("ciphertext", &ct.0, suite.ciphertext_len()).map_err(malformed)?;
    expect_len("secret key", &sk.0, suite.secret_key_len()).map_err(malformed)?;
    match suite {
        KemSuite::MlKem1024 => {
            let encoded = Encoded::<DecapsulationKey<MlKem1024Params>>::try_from(sk.0.as_slice())
                .map_err(|_| SecureAggError::DecapsFailure("secret key encoding".into()))?;
            let dk = DecapsulationKey::<MlKem1024Params>::from_bytes(&encoded);
            let ct = ml_kem::Ciphertext::<MlKem1024>::try_from(ct.0.as_slice())
                .map_err(|_| SecureAggError::DecapsFailure("ciphertext encoding".into()))?;
            let ss = dk
                .decapsulate(&ct)
                .map_err(|_| SecureAggError::DecapsFailure("decapsulation failed".into()))?;
            let mut secret = [0u8; 32];
            secret.copy_from_slice(&ss);
            Ok(SharedSecret(secret))
        }
        KemSuite::MockKem => {
            let pk = tagged_hash(b"mockkem-pk", &[&sk.0]);
            Ok(SharedSecret(tagged_hash(b"mockkem-ss", &[&pk, &ct.0])))
        }
    }
}
