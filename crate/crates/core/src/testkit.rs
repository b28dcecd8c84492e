//! Shared helpers for unit and integration tests: deterministic identities
//! and pre-wired worlds.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::authenticity::{incept, public_keys, KeyEvent, KeyEventLog, Keyring, LogStore};
use crate::canonical::Digest;
use crate::model::{PrincipalId, PrincipalKind, World};

pub struct TestBench {
    pub world: World,
    pub logs: LogStore,
    pub keyring: Keyring,
    pub rng: ChaCha20Rng,
}

impl TestBench {
    pub fn new(seed: u64) -> Self {
        TestBench {
            world: World::new(),
            logs: LogStore::new(),
            keyring: Keyring::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// Mint keys, incept, and register a principal of the given kind.
    pub fn principal(&mut self, kind: PrincipalKind) -> PrincipalId {
        let (id, _) = self.principal_with_event(kind);
        id
    }

    pub fn principal_with_event(&mut self, kind: PrincipalKind) -> (PrincipalId, KeyEvent) {
        let (signing, next) = Keyring::mint(&mut self.rng);
        let (prefix, event) = incept(&signing, &public_keys(&next)).expect("incept");
        self.keyring.remember(prefix.clone(), &signing, &next);
        self.logs
            .insert(KeyEventLog::from_inception(event.clone()).expect("inception log"));
        let (world, principal) = self
            .world
            .register_principal(kind, &event)
            .expect("register");
        self.world = world;
        (principal.id, event)
    }

    /// A fresh unsigned-world-unknown inception event, without registering.
    pub fn loose_inception(&mut self) -> (Digest, KeyEvent) {
        let (signing, next) = Keyring::mint(&mut self.rng);
        let (prefix, event) = incept(&signing, &public_keys(&next)).expect("incept");
        self.keyring.remember(prefix.clone(), &signing, &next);
        (prefix, event)
    }
}
