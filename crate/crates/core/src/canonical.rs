//! Canonical JSON encoding and content digests.
//!
//! Every digest and signature in this crate is computed over the same byte
//! form: compact JSON with lexicographically sorted object keys, UTF-8,
//! base-10 integers, and no insignificant whitespace. Digests are SHA-256,
//! rendered as 64 lowercase hex characters.
//!
//! Hex strictness matters for tamper evidence: `"ab"` and `"aB"` decode to
//! the same bytes, so a case flip inside a stored digest or signature would
//! go unnoticed if parsing were lenient. All hex fields therefore reject
//! uppercase input.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use std::fmt;

/// Length of a SHA-256 digest in hex characters.
pub const DIGEST_HEX_LEN: usize = 64;

/// Placeholder occupying a self-addressing digest field while the digest of
/// the surrounding object is computed. Same byte length as the digest that
/// replaces it, so embedding never shifts the canonical form.
pub const SAID_PLACEHOLDER: &str =
    "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CanonicalError {
    #[error("value does not serialize to canonical JSON: {0}")]
    NonCanonicalInput(String),
    #[error("not a {DIGEST_HEX_LEN}-char lowercase hex digest: {0:?}")]
    BadDigest(String),
    #[error("not a lowercase hex string: {0:?}")]
    BadHex(String),
}

/// A SHA-256 content digest in lowercase hex form.
///
/// Also used as the self-certifying prefix of a key-event log and as the
/// self-addressing identifier (SAID) of semantic objects.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Digest(String);

impl Digest {
    pub fn parse(s: &str) -> Result<Self, CanonicalError> {
        if s.len() == DIGEST_HEX_LEN && is_lower_hex(s) {
            Ok(Digest(s.to_owned()))
        } else {
            Err(CanonicalError::BadDigest(s.to_owned()))
        }
    }

    /// The all-zero placeholder value. Valid hex, never a real digest in
    /// practice, and excluded from verification paths explicitly.
    pub fn placeholder() -> Self {
        Digest(SAID_PLACEHOLDER.to_owned())
    }

    pub fn is_placeholder(&self) -> bool {
        self.0 == SAID_PLACEHOLDER
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Digest::parse(&s).map_err(serde::de::Error::custom)
    }
}

fn is_lower_hex(s: &str) -> bool {
    s.bytes()
        .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

/// Decode a hex string, rejecting anything that is not lowercase hex of even
/// length. `hex::decode` alone would accept uppercase.
pub fn strict_hex_decode(s: &str) -> Result<Vec<u8>, CanonicalError> {
    if !is_lower_hex(s) || s.len() % 2 != 0 {
        return Err(CanonicalError::BadHex(s.to_owned()));
    }
    hex::decode(s).map_err(|_| CanonicalError::BadHex(s.to_owned()))
}

/// Serialize a value to its canonical byte form.
///
/// Round-tripping through `serde_json::Value` sorts object keys (the map is
/// BTreeMap-backed) and the compact writer emits no whitespace.
pub fn canonical_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CanonicalError> {
    let v = serde_json::to_value(value)
        .map_err(|e| CanonicalError::NonCanonicalInput(e.to_string()))?;
    serde_json::to_vec(&v).map_err(|e| CanonicalError::NonCanonicalInput(e.to_string()))
}

/// SHA-256 over raw bytes, hex-encoded lowercase.
pub fn sha256_hex(bytes: &[u8]) -> Digest {
    Digest(hex::encode(Sha256::digest(bytes)))
}

/// SHA-256 over the canonical byte form of a value.
pub fn digest_canonical<T: Serialize>(value: &T) -> Result<Digest, CanonicalError> {
    Ok(sha256_hex(&canonical_bytes(value)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_bytes_sort_keys_and_strip_whitespace() {
        let v = json!({"b": 2, "a": {"y": [1, 2], "x": "s"}});
        let bytes = canonical_bytes(&v).unwrap();
        assert_eq!(bytes, br#"{"a":{"x":"s","y":[1,2]},"b":2}"#);
    }

    #[test]
    fn sha256_of_empty_object_matches_known_vector() {
        // sha256(b"{}") cross-checked with python hashlib.
        let d = digest_canonical(&json!({})).unwrap();
        assert_eq!(
            d.as_str(),
            "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a"
        );
    }

    #[test]
    fn digest_rejects_uppercase_and_wrong_length() {
        let ok = "a".repeat(64);
        assert!(Digest::parse(&ok).is_ok());
        assert!(Digest::parse(&"A".repeat(64)).is_err());
        assert!(Digest::parse(&"a".repeat(63)).is_err());
        let json_upper = format!("\"{}\"", "A".repeat(64));
        assert!(serde_json::from_str::<Digest>(&json_upper).is_err());
    }

    #[test]
    fn strict_hex_rejects_uppercase() {
        assert_eq!(strict_hex_decode("00ff").unwrap(), vec![0, 255]);
        assert!(strict_hex_decode("00FF").is_err());
        assert!(strict_hex_decode("0f0").is_err());
    }

    #[test]
    fn placeholder_shape() {
        let p = Digest::placeholder();
        assert!(p.is_placeholder());
        assert_eq!(p.as_str().len(), DIGEST_HEX_LEN);
        assert!(Digest::parse(SAID_PLACEHOLDER).is_ok());
    }
}
