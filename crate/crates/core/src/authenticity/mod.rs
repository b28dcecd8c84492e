//! Factual-authenticity substrate: self-certifying identifiers, append-only
//! hash-chained key event logs with pre-rotation, witness receipts, data
//! anchoring, and causal ordering over a DAG.

mod causal;
mod keys;
mod log;

pub use causal::{CausalGraph, CausalOrder};
pub use keys::{public_keys, KeyPair, KeySecrets, Keyring, PublicKeyHex, SignatureHex};
pub use log::{
    anchor_data, anchor_many, incept, key_commitment, rotate, verify_inception, verify_kel,
    verify_step, EventKind, KeyEvent, KeyEventLog, KeyState, LogStore, WitnessKeys,
    WitnessReceipt,
};

use crate::canonical::{CanonicalError, Digest};

#[derive(Debug, thiserror::Error)]
pub enum AuthError {
    #[error("key set is empty")]
    EmptyKeySet,
    #[error("invalid inception event: {0}")]
    InvalidInception(String),
    #[error("broken chain: {0}")]
    BrokenChain(String),
    #[error("bad signature: {0}")]
    BadSignature(String),
    #[error("sequence gap: expected {expected}, found {found}")]
    SeqGap { expected: u64, found: u64 },
    #[error("rotation keys do not match the pre-rotation commitment")]
    PreRotationViolation,
    #[error("event {seq} has {have} valid receipts, {need} required")]
    InsufficientReceipts { seq: u64, have: usize, need: usize },
    #[error("unknown event digest {0}")]
    UnknownEvent(Digest),
    #[error("identical events cannot be causally ordered")]
    IdenticalEvents,
    #[error("edge would create a cycle")]
    WouldCycle,
    #[error("no log for prefix {0}")]
    UnknownPrefix(Digest),
    #[error("no secret keys for prefix {0}")]
    MissingKeys(Digest),
    #[error("cannot parse log: {0}")]
    Parse(String),
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
}
