//! Append-only, hash-chained key event logs with pre-rotation.
//!
//! An identifier is the SHA-256 digest of its inception event's canonical
//! bytes, computed with the `prefix` field holding the all-zero placeholder
//! and the `signatures` list empty, then embedded (self-certifying). Every
//! later event links to its predecessor by digest over the predecessor's
//! full canonical bytes, and every rotation must reveal keys whose canonical
//! digest equals the commitment published by the previous establishment
//! event. Signatures cover the canonical event bytes with the `signatures`
//! field empty; rotations are signed by the newly revealed keys.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use super::keys::{public_keys, KeyPair, PublicKeyHex, SignatureHex};
use super::AuthError;
use crate::canonical::{canonical_bytes, digest_canonical, sha256_hex, Digest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Inception,
    Rotation,
    Interaction,
}

/// One entry in a key event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyEvent {
    pub prefix: Digest,
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_digest: Option<Digest>,
    pub event_kind: EventKind,
    pub signing_keys: Vec<PublicKeyHex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_commitment: Option<Digest>,
    pub anchors: Vec<Digest>,
    pub signatures: Vec<SignatureHex>,
}

impl KeyEvent {
    /// Canonical bytes signed by the controller: the event with an empty
    /// signature list.
    pub fn signing_input(&self) -> Result<Vec<u8>, AuthError> {
        let mut unsigned = self.clone();
        unsigned.signatures.clear();
        Ok(canonical_bytes(&unsigned)?)
    }

    /// Canonical bytes that define the self-certifying prefix: placeholder
    /// prefix, empty signatures.
    pub fn prefix_input(&self) -> Result<Vec<u8>, AuthError> {
        let mut blank = self.clone();
        blank.prefix = Digest::placeholder();
        blank.signatures.clear();
        Ok(canonical_bytes(&blank)?)
    }

    /// Digest over the full canonical event bytes (signatures included);
    /// this is what successors chain to and witnesses receipt.
    pub fn event_digest(&self) -> Result<Digest, AuthError> {
        Ok(sha256_hex(&canonical_bytes(self)?))
    }
}

/// Digest committing to a future key set: SHA-256 over the canonical
/// encoding of the public key list.
pub fn key_commitment(keys: &[PublicKeyHex]) -> Result<Digest, AuthError> {
    Ok(digest_canonical(&keys)?)
}

/// An append-only log of key events sharing one prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyEventLog {
    pub prefix: Digest,
    pub events: Vec<KeyEvent>,
}

impl KeyEventLog {
    pub fn from_inception(event: KeyEvent) -> Result<Self, AuthError> {
        verify_inception(&event)?;
        Ok(KeyEventLog {
            prefix: event.prefix.clone(),
            events: vec![event],
        })
    }

    pub fn last(&self) -> Option<&KeyEvent> {
        self.events.last()
    }

    /// The log restricted to its first `n` events.
    pub fn truncated(&self, n: usize) -> KeyEventLog {
        KeyEventLog {
            prefix: self.prefix.clone(),
            events: self.events[..n.min(self.events.len())].to_vec(),
        }
    }

    /// Newline-delimited canonical events, the `.kel.jsonl` byte form.
    pub fn to_jsonl(&self) -> Result<Vec<u8>, AuthError> {
        let mut out = Vec::new();
        for event in &self.events {
            out.extend_from_slice(&canonical_bytes(event)?);
            out.push(b'\n');
        }
        Ok(out)
    }

    pub fn parse_jsonl(bytes: &[u8]) -> Result<Self, AuthError> {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| AuthError::Parse(format!("not utf-8: {e}")))?;
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let event: KeyEvent = serde_json::from_str(line)
                .map_err(|e| AuthError::Parse(format!("line {}: {e}", i + 1)))?;
            events.push(event);
        }
        let first = events
            .first()
            .ok_or_else(|| AuthError::BrokenChain("log has no events".into()))?;
        Ok(KeyEventLog {
            prefix: first.prefix.clone(),
            events,
        })
    }

    /// Digests anchored by interaction events, in log order.
    pub fn anchored_digests(&self) -> Vec<Digest> {
        self.events
            .iter()
            .filter(|e| e.event_kind == EventKind::Interaction)
            .flat_map(|e| e.anchors.iter().cloned())
            .collect()
    }

    /// Find the interaction event anchoring `digest`, if any.
    pub fn find_anchor(&self, digest: &Digest) -> Option<&KeyEvent> {
        self.events
            .iter()
            .find(|e| e.event_kind == EventKind::Interaction && e.anchors.contains(digest))
    }
}

/// Key state reached after replaying a verified log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyState {
    pub prefix: Digest,
    pub signing_keys: Vec<PublicKeyHex>,
    pub next_commitment: Digest,
    pub last_seq: u64,
    pub last_digest: Digest,
}

/// A third-party signature over an event digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessReceipt {
    pub witness_id: Digest,
    pub event_digest: Digest,
    pub signature: SignatureHex,
}

impl WitnessReceipt {
    pub fn sign(witness_id: Digest, event_digest: Digest, key: &KeyPair) -> Self {
        let signature = key.sign(event_digest.as_str().as_bytes());
        WitnessReceipt {
            witness_id,
            event_digest,
            signature,
        }
    }
}

/// Current verification keys per witness identifier, supplied by whoever
/// runs verification.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct WitnessKeys {
    pub keys: BTreeMap<Digest, Vec<PublicKeyHex>>,
}

impl WitnessKeys {
    pub fn empty() -> Self {
        WitnessKeys::default()
    }

    pub fn insert(&mut self, witness_id: Digest, keys: Vec<PublicKeyHex>) {
        self.keys.insert(witness_id, keys);
    }
}

/// Create an inception event. Returns the self-certifying prefix along with
/// the signed event.
pub fn incept(
    signing: &[KeyPair],
    next_keys: &[PublicKeyHex],
) -> Result<(Digest, KeyEvent), AuthError> {
    if signing.is_empty() || next_keys.is_empty() {
        return Err(AuthError::EmptyKeySet);
    }
    let mut event = KeyEvent {
        prefix: Digest::placeholder(),
        seq: 0,
        prior_digest: None,
        event_kind: EventKind::Inception,
        signing_keys: public_keys(signing),
        next_commitment: Some(key_commitment(next_keys)?),
        anchors: Vec::new(),
        signatures: Vec::new(),
    };
    let prefix = sha256_hex(&event.prefix_input()?);
    event.prefix = prefix.clone();
    let sig = signing[0].sign(&event.signing_input()?);
    event.signatures.push(sig);
    Ok((prefix, event))
}

/// Append a rotation event revealing the pre-committed key set and
/// committing to the next one. The new keys sign.
pub fn rotate(
    kel: &KeyEventLog,
    new_signing: &[KeyPair],
    new_next_keys: &[PublicKeyHex],
) -> Result<(KeyEventLog, KeyEvent), AuthError> {
    if new_signing.is_empty() || new_next_keys.is_empty() {
        return Err(AuthError::EmptyKeySet);
    }
    let state = verify_kel(kel, &[], 0, &WitnessKeys::empty())?;
    let revealed = public_keys(new_signing);
    if key_commitment(&revealed)? != state.next_commitment {
        return Err(AuthError::PreRotationViolation);
    }
    let mut event = KeyEvent {
        prefix: kel.prefix.clone(),
        seq: state.last_seq + 1,
        prior_digest: Some(state.last_digest),
        event_kind: EventKind::Rotation,
        signing_keys: revealed,
        next_commitment: Some(key_commitment(new_next_keys)?),
        anchors: Vec::new(),
        signatures: Vec::new(),
    };
    let sig = new_signing[0].sign(&event.signing_input()?);
    event.signatures.push(sig);
    let mut out = kel.clone();
    out.events.push(event.clone());
    Ok((out, event))
}

/// Append an interaction event anchoring a content digest under the current
/// key state.
pub fn anchor_data(
    kel: &KeyEventLog,
    content_digest: &Digest,
    signing: &[KeyPair],
) -> Result<(KeyEventLog, KeyEvent), AuthError> {
    anchor_many(kel, std::slice::from_ref(content_digest), signing)
}

/// Append one interaction event anchoring several digests at once, e.g. a
/// record digest together with the event seal it depends on.
pub fn anchor_many(
    kel: &KeyEventLog,
    content_digests: &[Digest],
    signing: &[KeyPair],
) -> Result<(KeyEventLog, KeyEvent), AuthError> {
    let state = verify_kel(kel, &[], 0, &WitnessKeys::empty())?;
    let keys = public_keys(signing);
    if keys != state.signing_keys {
        return Err(AuthError::BadSignature(
            "anchoring keys do not match current key state".into(),
        ));
    }
    let mut event = KeyEvent {
        prefix: kel.prefix.clone(),
        seq: state.last_seq + 1,
        prior_digest: Some(state.last_digest),
        event_kind: EventKind::Interaction,
        signing_keys: keys,
        next_commitment: None,
        anchors: content_digests.to_vec(),
        signatures: Vec::new(),
    };
    let sig = signing[0].sign(&event.signing_input()?);
    event.signatures.push(sig);
    let mut out = kel.clone();
    out.events.push(event.clone());
    Ok((out, event))
}

/// Check a standalone inception event: shape, self-certifying prefix, and
/// self-signature.
pub fn verify_inception(event: &KeyEvent) -> Result<(), AuthError> {
    let invalid = |msg: &str| AuthError::InvalidInception(msg.into());
    if event.event_kind != EventKind::Inception {
        return Err(invalid("event kind is not inception"));
    }
    if event.seq != 0 {
        return Err(invalid("inception must sit at seq 0"));
    }
    if event.prior_digest.is_some() {
        return Err(invalid("inception carries a prior digest"));
    }
    if event.signing_keys.is_empty() {
        return Err(invalid("no signing keys"));
    }
    if event.next_commitment.is_none() {
        return Err(invalid("no next-key commitment"));
    }
    if event.prefix != sha256_hex(&event.prefix_input()?) {
        return Err(invalid("prefix does not match placeholder digest"));
    }
    let Some(sig) = event.signatures.first() else {
        return Err(invalid("unsigned"));
    };
    if !sig.verifies(&event.signing_keys[0], &event.signing_input()?) {
        return Err(invalid("self-signature does not verify"));
    }
    Ok(())
}

/// Verify one event against the state reached so far (`None` for the
/// inception position) and return the advanced state.
pub fn verify_step(state: Option<&KeyState>, event: &KeyEvent) -> Result<KeyState, AuthError> {
    match state {
        None => {
            verify_inception(event).map_err(|e| match e {
                // Shape errors at seq 0 are chain errors from the log's view.
                AuthError::InvalidInception(msg) => AuthError::BrokenChain(msg),
                other => other,
            })?;
        }
        Some(prev) => {
            if event.seq != prev.last_seq + 1 {
                return Err(AuthError::SeqGap {
                    expected: prev.last_seq + 1,
                    found: event.seq,
                });
            }
            if event.prefix != prev.prefix {
                return Err(AuthError::BrokenChain(format!(
                    "event {} carries foreign prefix",
                    event.seq
                )));
            }
            match &event.prior_digest {
                None => {
                    return Err(AuthError::BrokenChain(format!(
                        "event {} has no prior digest",
                        event.seq
                    )))
                }
                Some(prior) if *prior != prev.last_digest => {
                    return Err(AuthError::BrokenChain(format!(
                        "event {} prior digest mismatch",
                        event.seq
                    )))
                }
                Some(_) => {}
            }
            if event.signing_keys.is_empty() {
                return Err(AuthError::BadSignature(format!(
                    "event {} lists no signing keys",
                    event.seq
                )));
            }
            match event.event_kind {
                EventKind::Inception => {
                    return Err(AuthError::BrokenChain(format!(
                        "inception at seq {}",
                        event.seq
                    )))
                }
                EventKind::Rotation => {
                    if event.next_commitment.is_none() {
                        return Err(AuthError::BrokenChain(format!(
                            "rotation {} lacks next commitment",
                            event.seq
                        )));
                    }
                    if key_commitment(&event.signing_keys)? != prev.next_commitment {
                        return Err(AuthError::PreRotationViolation);
                    }
                }
                EventKind::Interaction => {
                    if event.next_commitment.is_some() {
                        return Err(AuthError::BrokenChain(format!(
                            "interaction {} carries a key commitment",
                            event.seq
                        )));
                    }
                    if event.signing_keys != prev.signing_keys {
                        return Err(AuthError::BadSignature(format!(
                            "interaction {} keys differ from key state",
                            event.seq
                        )));
                    }
                }
            }
            let Some(sig) = event.signatures.first() else {
                return Err(AuthError::BadSignature(format!(
                    "event {} unsigned",
                    event.seq
                )));
            };
            if !sig.verifies(&event.signing_keys[0], &event.signing_input()?) {
                return Err(AuthError::BadSignature(format!(
                    "event {} signature does not verify",
                    event.seq
                )));
            }
        }
    }
    let next_commitment = match (&event.next_commitment, state) {
        (Some(c), _) => c.clone(),
        (None, Some(prev)) => prev.next_commitment.clone(),
        (None, None) => unreachable!("inception always commits"),
    };
    Ok(KeyState {
        prefix: event.prefix.clone(),
        signing_keys: event.signing_keys.clone(),
        next_commitment,
        last_seq: event.seq,
        last_digest: event.event_digest()?,
    })
}

/// Verify an entire log plus witness receipts at a count threshold.
///
/// Succeeds iff every chain link, signature, and pre-rotation commitment
/// verifies and every event carries at least `threshold` valid receipts
/// from distinct witnesses.
pub fn verify_kel(
    kel: &KeyEventLog,
    receipts: &[WitnessReceipt],
    threshold: usize,
    witnesses: &WitnessKeys,
) -> Result<KeyState, AuthError> {
    if kel.events.is_empty() {
        return Err(AuthError::BrokenChain("log has no events".into()));
    }
    if kel.prefix != kel.events[0].prefix {
        return Err(AuthError::BrokenChain(
            "log prefix differs from inception prefix".into(),
        ));
    }
    let mut state: Option<KeyState> = None;
    for event in &kel.events {
        let next = verify_step(state.as_ref(), event)?;
        if threshold > 0 {
            check_receipts(&next, event, receipts, threshold, witnesses)?;
        }
        state = Some(next);
    }
    Ok(state.expect("non-empty log"))
}

fn check_receipts(
    state: &KeyState,
    event: &KeyEvent,
    receipts: &[WitnessReceipt],
    threshold: usize,
    witnesses: &WitnessKeys,
) -> Result<(), AuthError> {
    let digest = &state.last_digest;
    let mut valid: BTreeSet<&Digest> = BTreeSet::new();
    for receipt in receipts.iter().filter(|r| r.event_digest == *digest) {
        let Some(keys) = witnesses.keys.get(&receipt.witness_id) else {
            continue;
        };
        let Some(key) = keys.first() else { continue };
        if receipt
            .signature
            .verifies(key, digest.as_str().as_bytes())
        {
            valid.insert(&receipt.witness_id);
        }
    }
    if valid.len() < threshold {
        return Err(AuthError::InsufficientReceipts {
            seq: event.seq,
            have: valid.len(),
            need: threshold,
        });
    }
    Ok(())
}

/// All logs known to a world, keyed by prefix.
#[derive(Debug, Clone, Default)]
pub struct LogStore {
    logs: BTreeMap<Digest, KeyEventLog>,
}

impl LogStore {
    pub fn new() -> Self {
        LogStore::default()
    }

    pub fn insert(&mut self, log: KeyEventLog) {
        self.logs.insert(log.prefix.clone(), log);
    }

    pub fn get(&self, prefix: &Digest) -> Option<&KeyEventLog> {
        self.logs.get(prefix)
    }

    pub fn contains(&self, prefix: &Digest) -> bool {
        self.logs.contains_key(prefix)
    }

    pub fn iter(&self) -> impl Iterator<Item = &KeyEventLog> {
        self.logs.values()
    }

    /// Anchor `content` into the log at `prefix` using the keyring's current
    /// secrets for that prefix. Returns the anchoring event.
    pub fn anchor(
        &mut self,
        prefix: &Digest,
        content: &Digest,
        keyring: &super::keys::Keyring,
    ) -> Result<KeyEvent, AuthError> {
        self.anchor_all(prefix, std::slice::from_ref(content), keyring)
    }

    /// Anchor several digests into one interaction event at `prefix`.
    pub fn anchor_all(
        &mut self,
        prefix: &Digest,
        contents: &[Digest],
        keyring: &super::keys::Keyring,
    ) -> Result<KeyEvent, AuthError> {
        let log = self
            .logs
            .get(prefix)
            .ok_or_else(|| AuthError::UnknownPrefix(prefix.clone()))?;
        let signing = keyring
            .signing_pairs(prefix)
            .map_err(|_| AuthError::MissingKeys(prefix.clone()))?;
        let (updated, event) = anchor_many(log, contents, &signing)?;
        self.logs.insert(prefix.clone(), updated);
        Ok(event)
    }
}
