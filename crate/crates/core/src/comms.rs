//! Messages, one-to-one connections, sender-controlled confidentiality
//! levels, and the confidentiality spheres derived from them.
//!
//! A connection's level is fixed by the initiator at creation and never
//! re-negotiated in place; messages inside the connection may carry any
//! level the sender chooses. Spheres are never stored: they are recomputed
//! from the open connections of a world snapshot.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

use crate::canonical::{digest_canonical, Digest};
use crate::model::{EcosystemId, ModelError, PrincipalId, World};

#[derive(Debug, thiserror::Error)]
pub enum CommsError {
    #[error("a connection requires two distinct principals")]
    SelfConnection,
    #[error("unknown principal {0}")]
    UnknownPrincipal(PrincipalId),
    #[error("unknown ecosystem {0}")]
    UnknownEcosystem(EcosystemId),
    #[error("unknown connection {0}")]
    UnknownConnection(ConnectionId),
    #[error("sender is not a party to the connection")]
    NotAParty,
    #[error("connection is terminated")]
    ConnectionTerminated,
    #[error("the confidentiality level is a sender-only attribute, set once at creation")]
    SenderOnlyAttribute,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Sender-controlled confidentiality classification. The ordering is for
/// display only; an intimate message is not "also private".
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum ConfidentialityLevel {
    Intimate,
    Private,
    Public,
}

impl ConfidentialityLevel {
    pub const ALL: [ConfidentialityLevel; 3] = [
        ConfidentialityLevel::Intimate,
        ConfidentialityLevel::Private,
        ConfidentialityLevel::Public,
    ];
}

impl fmt::Display for ConfidentialityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConfidentialityLevel::Intimate => "intimate",
            ConfidentialityLevel::Private => "private",
            ConfidentialityLevel::Public => "public",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageMode {
    Active,
    Passive,
}

#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ConnectionId(String);

impl ConnectionId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConnectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct MessageId(String);

impl MessageId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConnectionStatus {
    Open,
    Terminated,
}

/// A permanent one-to-one relationship between two principals, holding the
/// ordered list of messages exchanged over it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Connection {
    pub id: ConnectionId,
    /// The two distinct parties, stored in sorted order.
    pub parties: [PrincipalId; 2],
    pub level: ConfidentialityLevel,
    pub messages: Vec<MessageId>,
    pub status: ConnectionStatus,
}

impl Connection {
    pub fn involves(&self, p: &PrincipalId) -> bool {
        self.parties.iter().any(|q| q == p)
    }

    pub fn counterpart_of(&self, p: &PrincipalId) -> Option<&PrincipalId> {
        match (&self.parties[0] == p, &self.parties[1] == p) {
            (true, _) => Some(&self.parties[1]),
            (_, true) => Some(&self.parties[0]),
            _ => None,
        }
    }
}

/// A signal from a sender, levelled once at creation by the sender alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Message {
    pub id: MessageId,
    pub sender: PrincipalId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receiver: Option<PrincipalId>,
    pub mode: MessageMode,
    pub level: ConfidentialityLevel,
    pub payload_digest: Digest,
    pub logical_time: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<ConnectionId>,
}

impl Message {
    /// Canonical wire bytes of the message.
    pub fn to_wire(&self) -> Result<Vec<u8>, CommsError> {
        crate::canonical::canonical_bytes(self).map_err(|e| CommsError::Model(e.into()))
    }
}

/// The counterparts and connections a principal holds at one level.
/// Derived, never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfidentialitySphere {
    pub owner: PrincipalId,
    pub level: ConfidentialityLevel,
    pub counterparts: BTreeSet<PrincipalId>,
    pub connections: BTreeSet<ConnectionId>,
}

fn connection_id(
    parties: &[PrincipalId; 2],
    level: ConfidentialityLevel,
    generation: usize,
) -> Result<ConnectionId, CommsError> {
    let digest = digest_canonical(&(parties, level, generation))
        .map_err(|e| CommsError::Model(e.into()))?;
    Ok(ConnectionId(format!("c{}", &digest.as_str()[..24])))
}

fn message_id(sender: &PrincipalId, logical_time: u64) -> Result<MessageId, CommsError> {
    let digest = digest_canonical(&(sender, logical_time))
        .map_err(|e| CommsError::Model(e.into()))?;
    Ok(MessageId(format!("m{}", &digest.as_str()[..24])))
}

impl World {
    fn next_logical_time(&self, sender: &PrincipalId) -> u64 {
        self.messages
            .values()
            .filter(|m| m.sender == *sender)
            .map(|m| m.logical_time)
            .max()
            .map_or(1, |t| t + 1)
    }

    /// Open a connection between two registered principals at a fixed
    /// level. Re-opening an existing open (pair, level) connection returns
    /// it unchanged.
    pub fn open_connection(
        &self,
        a: &PrincipalId,
        b: &PrincipalId,
        level: ConfidentialityLevel,
    ) -> Result<(World, Connection), CommsError> {
        if a == b {
            return Err(CommsError::SelfConnection);
        }
        for p in [a, b] {
            if !self.principals.contains_key(p) {
                return Err(CommsError::UnknownPrincipal(p.clone()));
            }
        }
        let mut parties = [a.clone(), b.clone()];
        parties.sort();
        if let Some(existing) = self.connections.values().find(|c| {
            c.status == ConnectionStatus::Open && c.parties == parties && c.level == level
        }) {
            return Ok((self.clone(), existing.clone()));
        }
        let generation = self
            .connections
            .values()
            .filter(|c| c.parties == parties && c.level == level)
            .count();
        let conn = Connection {
            id: connection_id(&parties, level, generation)?,
            parties,
            level,
            messages: Vec::new(),
            status: ConnectionStatus::Open,
        };
        let mut world = self.clone();
        world.connections.insert(conn.id.clone(), conn.clone());
        Ok((world, conn))
    }

    /// Close a connection. Terminated connections keep their message
    /// history but accept nothing new and leave every sphere.
    pub fn terminate_connection(
        &self,
        id: &ConnectionId,
    ) -> Result<(World, Connection), CommsError> {
        if !self.connections.contains_key(id) {
            return Err(CommsError::UnknownConnection(id.clone()));
        }
        let mut world = self.clone();
        let entry = world.connections.get_mut(id).expect("checked above");
        entry.status = ConnectionStatus::Terminated;
        let updated = entry.clone();
        Ok((world, updated))
    }

    /// Send a message over a connection. The sender picks the level, which
    /// may differ from the connection's; logical time increases strictly
    /// per sender across the whole world.
    pub fn send_message(
        &self,
        conn_id: &ConnectionId,
        sender: &PrincipalId,
        level: ConfidentialityLevel,
        payload_digest: Digest,
        mode: MessageMode,
    ) -> Result<(World, Message), CommsError> {
        let conn = self
            .connections
            .get(conn_id)
            .ok_or_else(|| CommsError::UnknownConnection(conn_id.clone()))?;
        if !conn.involves(sender) {
            return Err(CommsError::NotAParty);
        }
        if conn.status == ConnectionStatus::Terminated {
            return Err(CommsError::ConnectionTerminated);
        }
        let logical_time = self.next_logical_time(sender);
        let receiver = match mode {
            MessageMode::Active => Some(conn.counterpart_of(sender).expect("party").clone()),
            MessageMode::Passive => None,
        };
        let message = Message {
            id: message_id(sender, logical_time)?,
            sender: sender.clone(),
            receiver,
            mode,
            level,
            payload_digest,
            logical_time,
            connection: Some(conn_id.clone()),
        };
        let mut world = self.clone();
        world
            .connections
            .get_mut(conn_id)
            .expect("checked above")
            .messages
            .push(message.id.clone());
        world.messages.insert(message.id.clone(), message.clone());
        Ok((world, message))
    }

    /// Emit a passive, receiver-less message into an ecosystem context.
    /// Returns the set of members the message is visible to under its
    /// level: the whole population for public emissions, the sender's
    /// sphere at that level for private and intimate ones.
    pub fn emit_passive(
        &self,
        sender: &PrincipalId,
        context: &EcosystemId,
        level: ConfidentialityLevel,
        payload_digest: Digest,
    ) -> Result<(World, Message, BTreeSet<PrincipalId>), CommsError> {
        if !self.principals.contains_key(sender) {
            return Err(CommsError::UnknownPrincipal(sender.clone()));
        }
        let eco = self
            .ecosystems
            .get(context)
            .ok_or_else(|| CommsError::UnknownEcosystem(context.clone()))?;
        let audience: BTreeSet<PrincipalId> = match level {
            ConfidentialityLevel::Public => eco
                .population
                .iter()
                .filter(|p| *p != sender)
                .cloned()
                .collect(),
            _ => {
                let sphere = self.compute_sphere(sender, level)?;
                sphere
                    .counterparts
                    .intersection(&eco.population)
                    .cloned()
                    .collect()
            }
        };
        let logical_time = self.next_logical_time(sender);
        let message = Message {
            id: message_id(sender, logical_time)?,
            sender: sender.clone(),
            receiver: None,
            mode: MessageMode::Passive,
            level,
            payload_digest,
            logical_time,
            connection: None,
        };
        let mut world = self.clone();
        world.messages.insert(message.id.clone(), message.clone());
        Ok((world, message, audience))
    }

    /// Derive a principal's sphere at one level from the open connections
    /// of this snapshot.
    pub fn compute_sphere(
        &self,
        owner: &PrincipalId,
        level: ConfidentialityLevel,
    ) -> Result<ConfidentialitySphere, CommsError> {
        if !self.principals.contains_key(owner) {
            return Err(CommsError::UnknownPrincipal(owner.clone()));
        }
        let mut counterparts = BTreeSet::new();
        let mut connections = BTreeSet::new();
        for conn in self.connections.values() {
            if conn.status != ConnectionStatus::Open || conn.level != level {
                continue;
            }
            if let Some(other) = conn.counterpart_of(owner) {
                counterparts.insert(other.clone());
                connections.insert(conn.id.clone());
            }
        }
        Ok(ConfidentialitySphere {
            owner: owner.clone(),
            level,
            counterparts,
            connections,
        })
    }
}

/// The confidentiality level is set exactly once, by the sender, at
/// creation. Any re-levelling attempt — by the receiver, or by the sender
/// after the fact — is refused.
pub fn attempt_relevel(
    _msg: &Message,
    _actor: &PrincipalId,
    _new_level: ConfidentialityLevel,
) -> Result<(), CommsError> {
    Err(CommsError::SenderOnlyAttribute)
}

#[cfg(test)]
#[path = "comms_tests.rs"]
mod tests;
