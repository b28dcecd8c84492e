//! Ed25519 key material: pairs, hex-encoded public keys and signatures, and
//! the in-memory keyring that tracks current + pre-committed secrets per
//! identifier prefix.

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use crate::canonical::{strict_hex_decode, CanonicalError, Digest};

/// An Ed25519 public key as 64 lowercase hex characters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct PublicKeyHex(String);

impl PublicKeyHex {
    pub fn parse(s: &str) -> Result<Self, CanonicalError> {
        let bytes = strict_hex_decode(s)?;
        if bytes.len() != 32 {
            return Err(CanonicalError::BadHex(s.to_owned()));
        }
        Ok(PublicKeyHex(s.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn verifying_key(&self) -> Result<VerifyingKey, CanonicalError> {
        let bytes: [u8; 32] = strict_hex_decode(&self.0)
            .map_err(|_| CanonicalError::BadHex(self.0.clone()))?
            .try_into()
            .map_err(|_| CanonicalError::BadHex(self.0.clone()))?;
        VerifyingKey::from_bytes(&bytes).map_err(|_| CanonicalError::BadHex(self.0.clone()))
    }
}

impl fmt::Display for PublicKeyHex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for PublicKeyHex {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        PublicKeyHex::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// An Ed25519 signature as 128 lowercase hex characters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct SignatureHex(String);

impl SignatureHex {
    pub fn parse(s: &str) -> Result<Self, CanonicalError> {
        let bytes = strict_hex_decode(s)?;
        if bytes.len() != 64 {
            return Err(CanonicalError::BadHex(s.to_owned()));
        }
        Ok(SignatureHex(s.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Check this signature over `message` under `key`.
    pub fn verifies(&self, key: &PublicKeyHex, message: &[u8]) -> bool {
        let Ok(vk) = key.verifying_key() else {
            return false;
        };
        let Ok(bytes) = strict_hex_decode(&self.0) else {
            return false;
        };
        let raw: [u8; 64] = match bytes.try_into() {
            Ok(raw) => raw,
            Err(_) => return false,
        };
        vk.verify(message, &Signature::from_bytes(&raw)).is_ok()
    }
}

impl<'de> Deserialize<'de> for SignatureHex {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        SignatureHex::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// A signing key pair held in memory.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        KeyPair {
            signing: SigningKey::from_bytes(&seed),
        }
    }

    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        KeyPair::from_seed(seed)
    }

    pub fn seed(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    pub fn public_hex(&self) -> PublicKeyHex {
        PublicKeyHex(hex::encode(self.signing.verifying_key().to_bytes()))
    }

    pub fn sign(&self, message: &[u8]) -> SignatureHex {
        SignatureHex(hex::encode(self.signing.sign(message).to_bytes()))
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyPair({})", self.public_hex())
    }
}

pub fn public_keys(pairs: &[KeyPair]) -> Vec<PublicKeyHex> {
    pairs.iter().map(KeyPair::public_hex).collect()
}

/// Secrets for one identifier: the keys currently allowed to sign and the
/// pre-committed next set.
#[derive(Clone, Serialize, Deserialize)]
pub struct KeySecrets {
    pub signing_seeds: Vec<String>,
    pub next_seeds: Vec<String>,
}

impl KeySecrets {
    pub fn signing_pairs(&self) -> Result<Vec<KeyPair>, CanonicalError> {
        seeds_to_pairs(&self.signing_seeds)
    }

    pub fn next_pairs(&self) -> Result<Vec<KeyPair>, CanonicalError> {
        seeds_to_pairs(&self.next_seeds)
    }
}

fn seeds_to_pairs(seeds: &[String]) -> Result<Vec<KeyPair>, CanonicalError> {
    seeds
        .iter()
        .map(|s| {
            let bytes: [u8; 32] = strict_hex_decode(s)?
                .try_into()
                .map_err(|_| CanonicalError::BadHex(s.clone()))?;
            Ok(KeyPair::from_seed(bytes))
        })
        .collect()
}

fn pairs_to_seeds(pairs: &[KeyPair]) -> Vec<String> {
    pairs.iter().map(|p| hex::encode(p.seed())).collect()
}

/// In-memory secret store, keyed by identifier prefix.
///
/// The simulator owns one for every scripted principal; the CLI loads one
/// from per-prefix files under `DISTGOV_KEYDIR`.
#[derive(Default, Clone)]
pub struct Keyring {
    secrets: BTreeMap<Digest, KeySecrets>,
}

impl Keyring {
    pub fn new() -> Self {
        Keyring::default()
    }

    pub fn insert(&mut self, prefix: Digest, secrets: KeySecrets) {
        self.secrets.insert(prefix, secrets);
    }

    pub fn get(&self, prefix: &Digest) -> Option<&KeySecrets> {
        self.secrets.get(prefix)
    }

    pub fn signing_pairs(&self, prefix: &Digest) -> Result<Vec<KeyPair>, CanonicalError> {
        match self.secrets.get(prefix) {
            Some(s) => s.signing_pairs(),
            None => Err(CanonicalError::BadHex(format!(
                "no secrets for prefix {prefix}"
            ))),
        }
    }

    /// Mint a fresh signing + next pair for a new identity. The caller runs
    /// inception with the returned pairs, then registers the prefix via
    /// [`Keyring::insert`].
    pub fn mint<R: RngCore + CryptoRng>(rng: &mut R) -> (Vec<KeyPair>, Vec<KeyPair>) {
        (vec![KeyPair::generate(rng)], vec![KeyPair::generate(rng)])
    }

    pub fn remember(&mut self, prefix: Digest, signing: &[KeyPair], next: &[KeyPair]) {
        self.insert(
            prefix,
            KeySecrets {
                signing_seeds: pairs_to_seeds(signing),
                next_seeds: pairs_to_seeds(next),
            },
        );
    }

    /// Promote the pre-committed next keys to signing and mint a new next
    /// set. Returns (new signing pairs, new next pairs) for the rotation.
    pub fn advance<R: RngCore + CryptoRng>(
        &mut self,
        prefix: &Digest,
        rng: &mut R,
    ) -> Result<(Vec<KeyPair>, Vec<KeyPair>), CanonicalError> {
        let secrets = self
            .secrets
            .get(prefix)
            .ok_or_else(|| CanonicalError::BadHex(format!("no secrets for prefix {prefix}")))?;
        let new_signing = secrets.next_pairs()?;
        let new_next = vec![KeyPair::generate(rng)];
        self.remember(prefix.clone(), &new_signing, &new_next);
        Ok((new_signing, new_next))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn sign_verify_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let kp = KeyPair::generate(&mut rng);
        let sig = kp.sign(b"payload");
        assert!(sig.verifies(&kp.public_hex(), b"payload"));
        assert!(!sig.verifies(&kp.public_hex(), b"payloae"));
    }

    #[test]
    fn signature_hex_rejects_uppercase() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let kp = KeyPair::generate(&mut rng);
        let sig = kp.sign(b"x");
        let upper = sig.as_str().to_uppercase();
        assert!(SignatureHex::parse(&upper).is_err());
        assert!(PublicKeyHex::parse(&kp.public_hex().as_str().to_uppercase()).is_err());
    }

    #[test]
    fn keyring_advance_promotes_next() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (signing, next) = Keyring::mint(&mut rng);
        let mut ring = Keyring::new();
        let prefix = crate::canonical::sha256_hex(b"id");
        ring.remember(prefix.clone(), &signing, &next);
        let committed = public_keys(&next);
        let (new_signing, new_next) = ring.advance(&prefix, &mut rng).unwrap();
        assert_eq!(public_keys(&new_signing), committed);
        assert_ne!(public_keys(&new_next), committed);
    }
}
