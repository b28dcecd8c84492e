//! The world registry: autonomous principals, non-autonomous things, and
//! ecosystems as governance triplets of population, legitimate authority,
//! and administration.
//!
//! All values are immutable; every mutating operation returns a fresh
//! `World`. Operations that constitute governance acts anchor a canonical
//! act digest into the responsible administration's key event log, so the
//! history of the world is replayable from the logs.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::authenticity::{verify_inception, AuthError, KeyEvent, Keyring, LogStore};
use crate::canonical::{digest_canonical, sha256_hex, CanonicalError, Digest};
use crate::comms::{Connection, ConnectionId, Message, MessageId};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid inception event: {0}")]
    InvalidInception(String),
    #[error("a principal with prefix {0} is already registered")]
    DuplicateId(PrincipalId),
    #[error("unknown principal {0}")]
    UnknownPrincipal(PrincipalId),
    #[error("founder set is empty")]
    EmptyFounders,
    #[error("invalid authority or administration: {0}")]
    InvalidAuthority(String),
    #[error("cannot remove the last population member")]
    LastMember,
    #[error("controller does not resolve: {0}")]
    UnknownController(String),
    #[error("unknown ecosystem {0}")]
    UnknownEcosystem(EcosystemId),
    #[error("unknown thing {0:?}")]
    UnknownThing(String),
    #[error("a thing with id {0:?} already exists")]
    DuplicateThing(String),
    #[error("cannot anchor governance act: {0}")]
    AnchorFailure(#[source] AuthError),
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
}

/// Identifier of an autonomous principal: the self-certifying digest of its
/// inception event.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct PrincipalId(Digest);

impl PrincipalId {
    pub fn digest(&self) -> &Digest {
        &self.0
    }
}

impl From<Digest> for PrincipalId {
    fn from(d: Digest) -> Self {
        PrincipalId(d)
    }
}

impl fmt::Display for PrincipalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrincipalKind {
    Individual,
    Organisation,
    Political,
}

/// An autonomous actor. The kind is immutable once registered, and the
/// key event log referenced by `kel_ref` carries the same prefix as `id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Principal {
    pub id: PrincipalId,
    pub kind: PrincipalKind,
    pub kel_ref: Digest,
}

/// Identifier of an ecosystem. Freshly created ecosystems get ULID-style
/// sortable ids; lifted lowest-level ecosystems derive theirs from the
/// principal prefix.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct EcosystemId(String);

impl EcosystemId {
    pub fn new(s: impl Into<String>) -> Self {
        EcosystemId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EcosystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

const CROCKFORD: &[u8; 32] = b"0123456789ABCDEFGHJKMNPQRSTVWXYZ";

/// ULID-style identifier: 48-bit time component plus 80 bits of entropy,
/// Crockford base32, lexicographically sortable.
pub fn ulid(time: u64, entropy: [u8; 10]) -> String {
    let mut value: u128 = ((time & 0xffff_ffff_ffff) as u128) << 80;
    for (i, byte) in entropy.iter().enumerate() {
        value |= (*byte as u128) << (72 - 8 * i);
    }
    (0..26)
        .rev()
        .map(|i| CROCKFORD[((value >> (5 * i)) & 31) as usize] as char)
        .collect()
}

/// A passive object with exactly one accountable controller.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thing {
    pub id: String,
    pub controller: ControllerRef,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerRef {
    Principal(PrincipalId),
    Administration(EcosystemId),
}

impl fmt::Display for ControllerRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControllerRef::Principal(p) => write!(f, "principal:{p}"),
            ControllerRef::Administration(e) => write!(f, "administration:{e}"),
        }
    }
}

/// A reference document legitimating an authority, held by content digest.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthorityDocument {
    pub digest: Digest,
    pub title: String,
}

impl AuthorityDocument {
    pub fn over(bytes: &[u8], title: impl Into<String>) -> Self {
        AuthorityDocument {
            digest: sha256_hex(bytes),
            title: title.into(),
        }
    }

    pub fn matches(&self, bytes: &[u8]) -> bool {
        sha256_hex(bytes) == self.digest
    }
}

/// Representatives and reference documents an ecosystem's population
/// recognises. Representatives need not be population members.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegitimateAuthority {
    pub representatives: BTreeSet<PrincipalId>,
    pub documents: BTreeSet<AuthorityDocument>,
}

impl LegitimateAuthority {
    pub fn of(representatives: impl IntoIterator<Item = PrincipalId>) -> Self {
        LegitimateAuthority {
            representatives: representatives.into_iter().collect(),
            documents: BTreeSet::new(),
        }
    }
}

/// The executive side of an authority: administrative entities, governing
/// references, and the log in which administrative acts are anchored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Administration {
    pub entities: BTreeSet<PrincipalId>,
    pub references: BTreeSet<AuthorityDocument>,
    pub admin_kel: Digest,
}

impl Administration {
    pub fn of(entities: impl IntoIterator<Item = PrincipalId>, admin_kel: Digest) -> Self {
        Administration {
            entities: entities.into_iter().collect(),
            references: BTreeSet::new(),
            admin_kel,
        }
    }
}

/// A self-contained unit of governance: population, authority,
/// administration. The population set is its own index set, so its
/// cardinality is the population size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ecosystem {
    pub id: EcosystemId,
    pub population: BTreeSet<PrincipalId>,
    pub authority: LegitimateAuthority,
    pub administration: Administration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub as_principal: Option<PrincipalId>,
}

impl Ecosystem {
    pub fn population_size(&self) -> usize {
        self.population.len()
    }

    /// Check the governance-triplet invariants against a world.
    pub fn validate(&self, world: &World) -> Result<(), ModelError> {
        if self.population.is_empty() {
            return Err(ModelError::InvalidAuthority("population is empty".into()));
        }
        for member in &self.population {
            world.principal(member)?;
        }
        if self.authority.representatives.is_empty() && self.authority.documents.is_empty() {
            return Err(ModelError::InvalidAuthority(
                "authority has neither representatives nor documents".into(),
            ));
        }
        for rep in &self.authority.representatives {
            world.principal(rep)?;
        }
        if self.administration.entities.is_empty() {
            return Err(ModelError::InvalidAuthority(
                "administration has no entities".into(),
            ));
        }
        for entity in &self.administration.entities {
            world.principal(entity)?;
        }
        if let Some(p) = &self.as_principal {
            let principal = world.principal(p)?;
            if principal.kind == PrincipalKind::Individual {
                return Err(ModelError::InvalidAuthority(
                    "an ecosystem principal must be an organisation or political entity".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A governance act whose canonical digest is anchored into an
/// administration's key event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "act", rename_all = "snake_case")]
pub enum AdminAct {
    EcosystemCreated {
        ecosystem: EcosystemId,
        population: BTreeSet<PrincipalId>,
    },
    MemberJoined {
        ecosystem: EcosystemId,
        principal: PrincipalId,
    },
    MemberLeft {
        ecosystem: EcosystemId,
        principal: PrincipalId,
    },
    ThingRegistered {
        thing: String,
        controller: ControllerRef,
    },
    ControllerChanged {
        thing: String,
        from: ControllerRef,
        to: ControllerRef,
    },
    PrincipalMinted {
        ecosystem: EcosystemId,
        principal: PrincipalId,
        inception_digest: Digest,
    },
}

/// Proof that an act was anchored: the act, its digest, and the digest of
/// the interaction event carrying it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchoredAct {
    pub act: AdminAct,
    pub digest: Digest,
    pub anchor_prefix: Digest,
    pub event_digest: Digest,
}

/// Everything registered: principals, ecosystems, things, treaty
/// agreements, plus the communication state built on top of them.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct World {
    pub principals: BTreeMap<PrincipalId, Principal>,
    pub ecosystems: BTreeMap<EcosystemId, Ecosystem>,
    pub things: BTreeMap<String, Thing>,
    pub agreements: BTreeSet<String>,
    pub connections: BTreeMap<ConnectionId, Connection>,
    pub messages: BTreeMap<MessageId, Message>,
}

impl World {
    pub fn new() -> Self {
        World::default()
    }

    pub fn principal(&self, id: &PrincipalId) -> Result<&Principal, ModelError> {
        self.principals
            .get(id)
            .ok_or_else(|| ModelError::UnknownPrincipal(id.clone()))
    }

    pub fn ecosystem(&self, id: &EcosystemId) -> Result<&Ecosystem, ModelError> {
        self.ecosystems
            .get(id)
            .ok_or_else(|| ModelError::UnknownEcosystem(id.clone()))
    }

    /// Ecosystems whose population contains `p`, in id order.
    pub fn ecosystems_of(&self, p: &PrincipalId) -> Vec<&Ecosystem> {
        self.ecosystems
            .values()
            .filter(|e| e.population.contains(p))
            .collect()
    }

    /// Register a principal from a valid self-signed inception event. The
    /// principal id is the event's self-certifying prefix; the caller keeps
    /// the one-event log in its log store.
    pub fn register_principal(
        &self,
        kind: PrincipalKind,
        inception: &KeyEvent,
    ) -> Result<(World, Principal), ModelError> {
        verify_inception(inception).map_err(|e| ModelError::InvalidInception(e.to_string()))?;
        let id = PrincipalId(inception.prefix.clone());
        if self.principals.contains_key(&id) {
            return Err(ModelError::DuplicateId(id));
        }
        let principal = Principal {
            id: id.clone(),
            kind,
            kel_ref: inception.prefix.clone(),
        };
        let mut world = self.clone();
        world.principals.insert(id, principal.clone());
        Ok((world, principal))
    }

    /// The lowest-level ecosystem of a principal: population, authority,
    /// and administration are all the principal itself. Lifting twice
    /// returns the existing ecosystem.
    pub fn lift_to_ecosystem(&self, p: &PrincipalId) -> Result<(World, Ecosystem), ModelError> {
        let principal = self.principal(p)?.clone();
        let id = EcosystemId(format!("e0-{p}"));
        if let Some(existing) = self.ecosystems.get(&id) {
            return Ok((self.clone(), existing.clone()));
        }
        let eco = Ecosystem {
            id: id.clone(),
            population: std::iter::once(p.clone()).collect(),
            authority: LegitimateAuthority::of([p.clone()]),
            administration: Administration::of([p.clone()], principal.kel_ref),
            as_principal: None,
        };
        let mut world = self.clone();
        world.ecosystems.insert(id, eco.clone());
        Ok((world, eco))
    }

    /// Found a new ecosystem; the creation act is anchored in the
    /// administration's log.
    pub fn create_ecosystem(
        &self,
        id: EcosystemId,
        founders: &BTreeSet<PrincipalId>,
        authority: LegitimateAuthority,
        administration: Administration,
        logs: &mut LogStore,
        keyring: &Keyring,
    ) -> Result<(World, Ecosystem, AnchoredAct), ModelError> {
        if founders.is_empty() {
            return Err(ModelError::EmptyFounders);
        }
        let eco = Ecosystem {
            id: id.clone(),
            population: founders.clone(),
            authority,
            administration,
            as_principal: None,
        };
        eco.validate(self)?;
        if !logs.contains(&eco.administration.admin_kel) {
            return Err(ModelError::InvalidAuthority(
                "administration log is not resolvable".into(),
            ));
        }
        let mut world = self.clone();
        world.ecosystems.insert(id.clone(), eco.clone());
        let anchored = anchor_act(
            AdminAct::EcosystemCreated {
                ecosystem: id,
                population: founders.clone(),
            },
            &eco.administration.admin_kel,
            logs,
            keyring,
        )?;
        Ok((world, eco, anchored))
    }

    /// Add a member; a no-op (and no anchored act) when already present.
    pub fn join_population(
        &self,
        eco_id: &EcosystemId,
        p: &PrincipalId,
        logs: &mut LogStore,
        keyring: &Keyring,
    ) -> Result<(World, Option<AnchoredAct>), ModelError> {
        self.principal(p)?;
        let eco = self.ecosystem(eco_id)?;
        if eco.population.contains(p) {
            return Ok((self.clone(), None));
        }
        let mut world = self.clone();
        let entry = world.ecosystems.get_mut(eco_id).expect("checked above");
        entry.population.insert(p.clone());
        let admin_kel = entry.administration.admin_kel.clone();
        let anchored = anchor_act(
            AdminAct::MemberJoined {
                ecosystem: eco_id.clone(),
                principal: p.clone(),
            },
            &admin_kel,
            logs,
            keyring,
        )?;
        Ok((world, Some(anchored)))
    }

    /// Remove a member; the population may never become empty.
    pub fn leave_population(
        &self,
        eco_id: &EcosystemId,
        p: &PrincipalId,
        logs: &mut LogStore,
        keyring: &Keyring,
    ) -> Result<(World, AnchoredAct), ModelError> {
        let eco = self.ecosystem(eco_id)?;
        if !eco.population.contains(p) {
            return Err(ModelError::UnknownPrincipal(p.clone()));
        }
        if eco.population.len() == 1 {
            return Err(ModelError::LastMember);
        }
        let mut world = self.clone();
        let entry = world.ecosystems.get_mut(eco_id).expect("checked above");
        entry.population.remove(p);
        let admin_kel = entry.administration.admin_kel.clone();
        let anchored = anchor_act(
            AdminAct::MemberLeft {
                ecosystem: eco_id.clone(),
                principal: p.clone(),
            },
            &admin_kel,
            logs,
            keyring,
        )?;
        Ok((world, anchored))
    }

    fn resolve_controller(&self, controller: &ControllerRef) -> Result<Digest, ModelError> {
        match controller {
            ControllerRef::Principal(p) => self
                .principal(p)
                .map(|principal| principal.kel_ref.clone())
                .map_err(|_| ModelError::UnknownController(controller.to_string())),
            ControllerRef::Administration(eco) => self
                .ecosystem(eco)
                .map(|e| e.administration.admin_kel.clone())
                .map_err(|_| ModelError::UnknownController(controller.to_string())),
        }
    }

    /// Register a passive thing under exactly one accountable controller;
    /// the registration is anchored in the controller's log.
    pub fn register_thing(
        &self,
        id: impl Into<String>,
        controller: ControllerRef,
        logs: &mut LogStore,
        keyring: &Keyring,
    ) -> Result<(World, Thing, AnchoredAct), ModelError> {
        let id = id.into();
        if self.things.contains_key(&id) {
            return Err(ModelError::DuplicateThing(id));
        }
        let anchor_prefix = self.resolve_controller(&controller)?;
        let thing = Thing {
            id: id.clone(),
            controller: controller.clone(),
        };
        let mut world = self.clone();
        world.things.insert(id.clone(), thing.clone());
        let anchored = anchor_act(
            AdminAct::ThingRegistered {
                thing: id,
                controller,
            },
            &anchor_prefix,
            logs,
            keyring,
        )?;
        Ok((world, thing, anchored))
    }

    /// Hand a thing to a new controller. The act is anchored in the new
    /// controller's log, keeping the accountability trail with whoever now
    /// answers for the thing.
    pub fn reassign_thing(
        &self,
        id: &str,
        new_controller: ControllerRef,
        logs: &mut LogStore,
        keyring: &Keyring,
    ) -> Result<(World, Thing, AnchoredAct), ModelError> {
        let thing = self
            .things
            .get(id)
            .ok_or_else(|| ModelError::UnknownThing(id.to_owned()))?;
        let anchor_prefix = self.resolve_controller(&new_controller)?;
        let act = AdminAct::ControllerChanged {
            thing: id.to_owned(),
            from: thing.controller.clone(),
            to: new_controller.clone(),
        };
        let mut world = self.clone();
        let updated = Thing {
            id: id.to_owned(),
            controller: new_controller,
        };
        world.things.insert(id.to_owned(), updated.clone());
        let anchored = anchor_act(act, &anchor_prefix, logs, keyring)?;
        Ok((world, updated, anchored))
    }

    /// Let an ecosystem act as a peer: register a principal for it from the
    /// supplied inception event and anchor that event in the admin log.
    pub fn adopt_ecosystem_principal(
        &self,
        eco_id: &EcosystemId,
        kind: PrincipalKind,
        inception: &KeyEvent,
        logs: &mut LogStore,
        keyring: &Keyring,
    ) -> Result<(World, Principal, AnchoredAct), ModelError> {
        if kind == PrincipalKind::Individual {
            return Err(ModelError::InvalidAuthority(
                "an ecosystem principal must be an organisation or political entity".into(),
            ));
        }
        let eco = self.ecosystem(eco_id)?.clone();
        let (world, principal) = self.register_principal(kind, inception)?;
        let mut world = world;
        let entry = world.ecosystems.get_mut(eco_id).expect("checked above");
        entry.as_principal = Some(principal.id.clone());
        let inception_digest = inception
            .event_digest()
            .map_err(ModelError::AnchorFailure)?;
        let anchored = anchor_act(
            AdminAct::PrincipalMinted {
                ecosystem: eco_id.clone(),
                principal: principal.id.clone(),
                inception_digest,
            },
            &eco.administration.admin_kel,
            logs,
            keyring,
        )?;
        Ok((world, principal, anchored))
    }

    /// Check every cross-reference and ecosystem invariant, and that each
    /// principal's log resolves under its own prefix.
    pub fn validate(&self, logs: &LogStore) -> Result<(), ModelError> {
        for (id, principal) in &self.principals {
            if principal.kel_ref != *id.digest() {
                return Err(ModelError::InvalidAuthority(format!(
                    "principal {id} references a foreign log"
                )));
            }
            match logs.get(&principal.kel_ref) {
                Some(log) if log.prefix == *id.digest() => {}
                _ => {
                    return Err(ModelError::UnknownController(format!(
                        "principal {id} has no resolvable log"
                    )))
                }
            }
        }
        for eco in self.ecosystems.values() {
            eco.validate(self)?;
            if !logs.contains(&eco.administration.admin_kel) {
                return Err(ModelError::InvalidAuthority(format!(
                    "ecosystem {} administration log is not resolvable",
                    eco.id
                )));
            }
        }
        for thing in self.things.values() {
            self.resolve_controller(&thing.controller)?;
        }
        for conn in self.connections.values() {
            for party in conn.parties.iter() {
                self.principal(party)?;
            }
        }
        Ok(())
    }

    /// Canonical `.world.json` byte form.
    pub fn to_canonical_json(&self) -> Result<Vec<u8>, ModelError> {
        Ok(crate::canonical::canonical_bytes(self)?)
    }

    pub fn from_json(bytes: &[u8]) -> Result<World, ModelError> {
        serde_json::from_slice(bytes)
            .map_err(|e| ModelError::InvalidAuthority(format!("cannot parse world: {e}")))
    }

    /// Digest over the canonical world document.
    pub fn digest(&self) -> Result<Digest, ModelError> {
        Ok(sha256_hex(&self.to_canonical_json()?))
    }
}

fn anchor_act(
    act: AdminAct,
    prefix: &Digest,
    logs: &mut LogStore,
    keyring: &Keyring,
) -> Result<AnchoredAct, ModelError> {
    let digest = digest_canonical(&act)?;
    let event = logs
        .anchor(prefix, &digest, keyring)
        .map_err(ModelError::AnchorFailure)?;
    Ok(AnchoredAct {
        act,
        digest,
        anchor_prefix: prefix.clone(),
        event_digest: event.event_digest().map_err(ModelError::AnchorFailure)?,
    })
}

#[cfg(test)]
#[path = "model_tests.rs"]
mod tests;
