//! Policy evaluation across ecosystems and jurisdictions: local rules,
//! treaties with per-party annotations, versioned signatory registries with
//! anchored amendments, assurance levels mapped to witness thresholds,
//! actor reputation, and screened data requests.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::authenticity::{verify_kel, AuthError, Keyring, LogStore, WitnessKeys, WitnessReceipt};
use crate::canonical::{digest_canonical, CanonicalError, Digest};
use crate::comms::ConfidentialityLevel;
use crate::model::{EcosystemId, ModelError, PrincipalId, PrincipalKind, World};
use crate::semantics::Record;

#[derive(Debug, thiserror::Error)]
pub enum GovError {
    #[error("unknown principal {0}")]
    UnknownPrincipal(PrincipalId),
    #[error("{0} is not a party to the treaty")]
    UnknownParty(EcosystemId),
    #[error("unknown treaty {0:?}")]
    UnknownTreaty(String),
    #[error("request was already screened")]
    AlreadyScreened,
    #[error("declared specificity {declared} does not match computed {computed}")]
    BadSpecificity { declared: u32, computed: u32 },
    #[error("cannot anchor governance act: {0}")]
    AnchorFailure(#[source] AuthError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
}

/// Ordinal assurance demanded of a counterparty, realized as a witness
/// receipt threshold on its key event log.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum AssuranceLevel {
    L0,
    L1,
    L2,
    L3,
}

impl AssuranceLevel {
    /// Witness receipts required per event. L0 skips verification
    /// entirely; L1 demands a valid log with no receipts.
    pub fn witness_threshold(self) -> usize {
        match self {
            AssuranceLevel::L0 | AssuranceLevel::L1 => 0,
            AssuranceLevel::L2 => 1,
            AssuranceLevel::L3 => 2,
        }
    }
}

impl fmt::Display for AssuranceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AssuranceLevel::L0 => "l0",
            AssuranceLevel::L1 => "l1",
            AssuranceLevel::L2 => "l2",
            AssuranceLevel::L3 => "l3",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Allow,
    Deny,
    RequireAssurance(AssuranceLevel),
}

/// Predicate over an interaction. `None` fields are wildcards.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleMatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender_kind: Option<PrincipalKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receiver_kind: Option<PrincipalKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<ConfidentialityLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitive: Option<bool>,
}

impl RuleMatch {
    pub fn for_purpose(purpose: &str) -> Self {
        RuleMatch {
            purpose: Some(purpose.to_owned()),
            ..RuleMatch::default()
        }
    }

    /// Count of non-wildcard fields.
    pub fn computed_specificity(&self) -> u32 {
        [
            self.sender_kind.is_some(),
            self.receiver_kind.is_some(),
            self.level.is_some(),
            self.purpose.is_some(),
            self.sensitive.is_some(),
        ]
        .iter()
        .filter(|set| **set)
        .count() as u32
    }

    pub fn covers(&self, ctx: &RequestContext) -> bool {
        self.sender_kind.map_or(true, |k| k == ctx.sender_kind)
            && self.receiver_kind.map_or(true, |k| k == ctx.receiver_kind)
            && self.level.map_or(true, |l| l == ctx.level)
            && self
                .purpose
                .as_ref()
                .map_or(true, |p| *p == ctx.purpose)
            && self.sensitive.map_or(true, |s| s == ctx.sensitive)
    }

    fn covers_purpose(&self, purpose: &str) -> bool {
        self.purpose.as_ref().map_or(true, |p| p == purpose)
    }
}

/// One rule issued by a jurisdiction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyRule {
    pub id: String,
    pub scope: EcosystemId,
    #[serde(rename = "match")]
    pub matcher: RuleMatch,
    pub effect: Effect,
    pub specificity: u32,
}

impl PolicyRule {
    pub fn new(
        id: impl Into<String>,
        scope: EcosystemId,
        matcher: RuleMatch,
        effect: Effect,
    ) -> Self {
        let specificity = matcher.computed_specificity();
        PolicyRule {
            id: id.into(),
            scope,
            matcher,
            effect,
            specificity,
        }
    }

    /// Loaded rules must declare the specificity their matcher computes.
    pub fn check_consistency(&self) -> Result<(), GovError> {
        let computed = self.matcher.computed_specificity();
        if computed != self.specificity {
            return Err(GovError::BadSpecificity {
                declared: self.specificity,
                computed,
            });
        }
        Ok(())
    }
}

/// The interaction under evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestContext {
    pub sender_kind: PrincipalKind,
    pub receiver_kind: PrincipalKind,
    pub level: ConfidentialityLevel,
    pub purpose: String,
    pub sensitive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartyStatus {
    Signed,
    Ratified,
    InForce,
    Denounced,
}

/// Per-party modification of which treaty rules bind that party.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Annotation {
    Reservation(String),
    Declaration(Digest),
    Derogation(String),
}

impl Annotation {
    fn withheld_rule(&self) -> Option<&str> {
        match self {
            Annotation::Reservation(rule) | Annotation::Derogation(rule) => Some(rule),
            Annotation::Declaration(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartyDates {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratification: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_into_force: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartyEntry {
    pub status: PartyStatus,
    pub dates: PartyDates,
    pub annotations: BTreeSet<Annotation>,
}

/// A multi-ecosystem agreement. The static identity lives here; the living
/// per-party state (status, dates, annotations) is owned by the signatory
/// registry so that registry replay is the single source of truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Treaty {
    pub id: String,
    pub administrator: EcosystemId,
    pub parties: BTreeSet<EcosystemId>,
    pub scope: BTreeSet<String>,
    pub rules: Vec<PolicyRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmendmentChange {
    Status { status: PartyStatus, effective: u64 },
    AddAnnotation(Annotation),
    RemoveAnnotation(Annotation),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Amendment {
    pub party: EcosystemId,
    pub change: AmendmentChange,
}

/// Machine-readable registry of a treaty's per-party state. Version 0 holds
/// every party at Signed; each amendment bumps the version and is anchored
/// in the administering ecosystem's log, so replaying the amendment log
/// from zero always reproduces the live entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignatoryRegistry {
    pub treaty_id: String,
    pub version: u64,
    pub entries: BTreeMap<EcosystemId, PartyEntry>,
    pub amendment_log: Vec<Amendment>,
}

impl SignatoryRegistry {
    pub fn create(treaty: &Treaty, signed_at: u64) -> Self {
        let entries = treaty
            .parties
            .iter()
            .map(|party| {
                (
                    party.clone(),
                    PartyEntry {
                        status: PartyStatus::Signed,
                        dates: PartyDates {
                            signature: Some(signed_at),
                            ..PartyDates::default()
                        },
                        annotations: BTreeSet::new(),
                    },
                )
            })
            .collect();
        SignatoryRegistry {
            treaty_id: treaty.id.clone(),
            version: 0,
            entries,
            amendment_log: Vec::new(),
        }
    }

    fn apply(entries: &mut BTreeMap<EcosystemId, PartyEntry>, amendment: &Amendment) {
        let Some(entry) = entries.get_mut(&amendment.party) else {
            return;
        };
        match &amendment.change {
            AmendmentChange::Status { status, effective } => {
                entry.status = *status;
                match status {
                    PartyStatus::Signed => entry.dates.signature = Some(*effective),
                    PartyStatus::Ratified => entry.dates.ratification = Some(*effective),
                    PartyStatus::InForce => entry.dates.entry_into_force = Some(*effective),
                    PartyStatus::Denounced => {}
                }
            }
            AmendmentChange::AddAnnotation(a) => {
                entry.annotations.insert(a.clone());
            }
            AmendmentChange::RemoveAnnotation(a) => {
                entry.annotations.remove(a);
            }
        }
    }

    /// Rebuild a registry from scratch by replaying an amendment log.
    pub fn replay(treaty: &Treaty, signed_at: u64, log: &[Amendment]) -> Self {
        let mut registry = SignatoryRegistry::create(treaty, signed_at);
        for amendment in log {
            SignatoryRegistry::apply(&mut registry.entries, amendment);
            registry.amendment_log.push(amendment.clone());
            registry.version += 1;
        }
        registry
    }

    pub fn in_force(&self, party: &EcosystemId) -> bool {
        self.entries
            .get(party)
            .map_or(false, |e| e.status == PartyStatus::InForce)
    }

    pub fn annotations(&self, party: &EcosystemId) -> Option<&BTreeSet<Annotation>> {
        self.entries.get(party).map(|e| &e.annotations)
    }
}

/// The digest anchored for one amendment: canonical bytes of
/// (treaty id, resulting version, amendment).
pub fn amendment_digest(
    treaty_id: &str,
    version: u64,
    amendment: &Amendment,
) -> Result<Digest, GovError> {
    Ok(digest_canonical(&(treaty_id, version, amendment))?)
}

/// The machine-readable notification emitted for every amendment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmendmentNotice {
    pub treaty_id: String,
    pub version: u64,
    pub change: Amendment,
    pub anchor_event_digest: Digest,
}

/// Apply an amendment to a registry, anchoring its digest into the
/// administering log. Returns the new registry plus the notification to
/// disseminate.
pub fn publish_amendment(
    registry: &SignatoryRegistry,
    amendment: Amendment,
    admin_kel: &Digest,
    logs: &mut LogStore,
    keyring: &Keyring,
) -> Result<(SignatoryRegistry, AmendmentNotice), GovError> {
    if !registry.entries.contains_key(&amendment.party) {
        return Err(GovError::UnknownParty(amendment.party.clone()));
    }
    let version = registry.version + 1;
    let digest = amendment_digest(&registry.treaty_id, version, &amendment)?;
    let event = logs
        .anchor(admin_kel, &digest, keyring)
        .map_err(GovError::AnchorFailure)?;
    let mut out = registry.clone();
    SignatoryRegistry::apply(&mut out.entries, &amendment);
    out.amendment_log.push(amendment.clone());
    out.version = version;
    let notice = AmendmentNotice {
        treaty_id: registry.treaty_id.clone(),
        version,
        change: amendment,
        anchor_event_digest: event.event_digest().map_err(GovError::AnchorFailure)?,
    };
    Ok((out, notice))
}

/// Where a resolved rule came from; carried into decision traces.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleOrigin {
    Local(EcosystemId),
    Treaty(String),
}

impl fmt::Display for RuleOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleOrigin::Local(eco) => write!(f, "local:{eco}"),
            RuleOrigin::Treaty(id) => write!(f, "treaty:{id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResolvedRule {
    pub rule: PolicyRule,
    pub origin: RuleOrigin,
}

/// Everything the governance engine knows besides the world: treaties,
/// registries, local rules, actor registries, and queued data requests.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GovernanceState {
    pub treaties: BTreeMap<String, Treaty>,
    pub registries: BTreeMap<String, SignatoryRegistry>,
    pub local_rules: BTreeMap<EcosystemId, Vec<PolicyRule>>,
    pub actors: BTreeMap<EcosystemId, ActorRegistry>,
    pub requests: BTreeMap<String, DataRequest>,
}

impl GovernanceState {
    pub fn new() -> Self {
        GovernanceState::default()
    }

    pub fn add_local_rule(&mut self, rule: PolicyRule) {
        self.local_rules
            .entry(rule.scope.clone())
            .or_default()
            .push(rule);
    }

    /// Install a treaty with its version-0 registry.
    pub fn install_treaty(&mut self, treaty: Treaty, signed_at: u64) {
        let registry = SignatoryRegistry::create(&treaty, signed_at);
        self.registries.insert(treaty.id.clone(), registry);
        self.treaties.insert(treaty.id.clone(), treaty);
    }
}

/// Collect every rule applicable to an interaction between two principals
/// for a purpose: local rules of every ecosystem containing either side,
/// plus rules of treaties in force for at least one ecosystem of each side
/// with matching scope, minus rules withheld by the involved parties'
/// reservations and derogations.
pub fn resolve_jurisdictions(
    world: &World,
    gov: &GovernanceState,
    sender: &PrincipalId,
    receiver: &PrincipalId,
    purpose: &str,
) -> Result<Vec<ResolvedRule>, GovError> {
    for p in [sender, receiver] {
        if !world.principals.contains_key(p) {
            return Err(GovError::UnknownPrincipal(p.clone()));
        }
    }
    let sender_ecos: BTreeSet<EcosystemId> = world
        .ecosystems_of(sender)
        .into_iter()
        .map(|e| e.id.clone())
        .collect();
    let receiver_ecos: BTreeSet<EcosystemId> = world
        .ecosystems_of(receiver)
        .into_iter()
        .map(|e| e.id.clone())
        .collect();

    let mut resolved = Vec::new();
    for eco in sender_ecos.union(&receiver_ecos) {
        if let Some(rules) = gov.local_rules.get(eco) {
            for rule in rules {
                if rule.matcher.covers_purpose(purpose) {
                    resolved.push(ResolvedRule {
                        rule: rule.clone(),
                        origin: RuleOrigin::Local(eco.clone()),
                    });
                }
            }
        }
    }
    for (id, treaty) in &gov.treaties {
        let Some(registry) = gov.registries.get(id) else {
            continue;
        };
        if !treaty.scope.contains(purpose) {
            continue;
        }
        let side_in_force = |ecos: &BTreeSet<EcosystemId>| -> BTreeSet<EcosystemId> {
            ecos.iter()
                .filter(|e| treaty.parties.contains(*e) && registry.in_force(e))
                .cloned()
                .collect()
        };
        let sender_parties = side_in_force(&sender_ecos);
        let receiver_parties = side_in_force(&receiver_ecos);
        if sender_parties.is_empty() || receiver_parties.is_empty() {
            continue;
        }
        let withheld: BTreeSet<&str> = sender_parties
            .union(&receiver_parties)
            .filter_map(|party| registry.annotations(party))
            .flatten()
            .filter_map(Annotation::withheld_rule)
            .collect();
        for rule in &treaty.rules {
            if withheld.contains(rule.id.as_str()) {
                continue;
            }
            if rule.matcher.covers_purpose(purpose) {
                resolved.push(ResolvedRule {
                    rule: rule.clone(),
                    origin: RuleOrigin::Treaty(id.clone()),
                });
            }
        }
    }
    resolved.sort();
    Ok(resolved)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Allow,
    Deny,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEntry {
    pub rule: String,
    pub origin: String,
    pub effect: Effect,
}

/// The result of evaluating a rule set over a context. Deterministic for
/// identical inputs, trace included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decision {
    pub outcome: Outcome,
    pub required_assurance: AssuranceLevel,
    pub trace: Vec<TraceEntry>,
}

impl Decision {
    pub fn to_canonical_json(&self) -> Result<Vec<u8>, GovError> {
        Ok(crate::canonical::canonical_bytes(self)?)
    }
}

/// Evaluate a resolved rule set over a context.
///
/// Among matching rules the highest specificity wins; ties resolve by
/// effect priority Deny > RequireAssurance > Allow. An empty matching set
/// denies by default. A RequireAssurance winner yields Allow conditioned on
/// the maximum demanded level, which the caller must verify.
pub fn evaluate(rules: &[ResolvedRule], ctx: &RequestContext) -> Decision {
    let matching: Vec<&ResolvedRule> = rules
        .iter()
        .filter(|r| r.rule.matcher.covers(ctx))
        .collect();
    let Some(max_specificity) = matching.iter().map(|r| r.rule.specificity).max() else {
        return Decision {
            outcome: Outcome::Deny,
            required_assurance: AssuranceLevel::L0,
            trace: vec![TraceEntry {
                rule: "default-deny".into(),
                origin: "builtin".into(),
                effect: Effect::Deny,
            }],
        };
    };
    let mut winners: Vec<&ResolvedRule> = matching
        .into_iter()
        .filter(|r| r.rule.specificity == max_specificity)
        .collect();
    winners.sort_by(|a, b| (&a.origin, &a.rule.id).cmp(&(&b.origin, &b.rule.id)));
    let trace: Vec<TraceEntry> = winners
        .iter()
        .map(|r| TraceEntry {
            rule: r.rule.id.clone(),
            origin: r.origin.to_string(),
            effect: r.rule.effect.clone(),
        })
        .collect();

    let denied = winners.iter().any(|r| r.rule.effect == Effect::Deny);
    let required_assurance = winners
        .iter()
        .filter_map(|r| match r.rule.effect {
            Effect::RequireAssurance(level) => Some(level),
            _ => None,
        })
        .max();
    if denied {
        Decision {
            outcome: Outcome::Deny,
            required_assurance: AssuranceLevel::L0,
            trace,
        }
    } else {
        Decision {
            outcome: Outcome::Allow,
            required_assurance: required_assurance.unwrap_or(AssuranceLevel::L0),
            trace,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verification {
    Met,
    NotMet,
}

/// Check a counterparty against a demanded assurance level: verify its log
/// at the implied witness threshold.
pub fn verify_counterparty(
    world: &World,
    logs: &LogStore,
    p: &PrincipalId,
    required: AssuranceLevel,
    receipts: &[WitnessReceipt],
    witnesses: &WitnessKeys,
) -> Result<Verification, GovError> {
    let principal = world
        .principal(p)
        .map_err(|_| GovError::UnknownPrincipal(p.clone()))?;
    if required == AssuranceLevel::L0 {
        return Ok(Verification::Met);
    }
    let Some(log) = logs.get(&principal.kel_ref) else {
        return Ok(Verification::NotMet);
    };
    match verify_kel(log, receipts, required.witness_threshold(), witnesses) {
        Ok(_) => Ok(Verification::Met),
        Err(_) => Ok(Verification::NotMet),
    }
}

/// Principals an administration currently vouches for. Changes are
/// anchored in the administration's log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorRegistry {
    pub administration: EcosystemId,
    pub reputable: BTreeSet<PrincipalId>,
    pub revocations: Vec<Digest>,
}

impl ActorRegistry {
    pub fn new(administration: EcosystemId) -> Self {
        ActorRegistry {
            administration,
            reputable: BTreeSet::new(),
            revocations: Vec::new(),
        }
    }
}

/// Governance acts anchored by this module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "act", rename_all = "snake_case")]
pub enum GovAct {
    ActorAdmitted {
        registry: EcosystemId,
        principal: PrincipalId,
    },
    ActorRevoked {
        registry: EcosystemId,
        principal: PrincipalId,
    },
    RequestScreened {
        request: String,
        approved: bool,
    },
}

fn anchor_gov_act(
    world: &World,
    administration: &EcosystemId,
    act: &GovAct,
    logs: &mut LogStore,
    keyring: &Keyring,
) -> Result<Digest, GovError> {
    let admin_kel = world.ecosystem(administration)?.administration.admin_kel.clone();
    let digest = digest_canonical(act)?;
    logs.anchor(&admin_kel, &digest, keyring)
        .map_err(GovError::AnchorFailure)?;
    Ok(digest)
}

/// Admit a principal to the reputable set, anchored.
pub fn admit_actor(
    world: &World,
    registry: &ActorRegistry,
    p: &PrincipalId,
    logs: &mut LogStore,
    keyring: &Keyring,
) -> Result<ActorRegistry, GovError> {
    world
        .principal(p)
        .map_err(|_| GovError::UnknownPrincipal(p.clone()))?;
    let mut out = registry.clone();
    out.reputable.insert(p.clone());
    anchor_gov_act(
        world,
        &registry.administration,
        &GovAct::ActorAdmitted {
            registry: registry.administration.clone(),
            principal: p.clone(),
        },
        logs,
        keyring,
    )?;
    Ok(out)
}

/// Remove a principal from the reputable set, anchored and recorded.
pub fn revoke_actor(
    world: &World,
    registry: &ActorRegistry,
    p: &PrincipalId,
    logs: &mut LogStore,
    keyring: &Keyring,
) -> Result<ActorRegistry, GovError> {
    let mut out = registry.clone();
    out.reputable.remove(p);
    let digest = anchor_gov_act(
        world,
        &registry.administration,
        &GovAct::ActorRevoked {
            registry: registry.administration.clone(),
            principal: p.clone(),
        },
        logs,
        keyring,
    )?;
    out.revocations.push(digest);
    Ok(out)
}

/// Predicate over one attribute of records under a bundle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Criterion {
    pub bundle_said: Digest,
    pub attribute: String,
    pub predicate: Predicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Exists,
    Equals(serde_json::Value),
}

impl Criterion {
    fn matches(&self, record: &Record) -> bool {
        if record.bundle_said != self.bundle_said {
            return false;
        }
        match (&self.predicate, record.values.get(&self.attribute)) {
            (Predicate::Exists, found) => found.is_some(),
            (Predicate::Equals(v), Some(found)) => v == found,
            (Predicate::Equals(_), None) => false,
        }
    }
}

/// The searchable record store each administration houses.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordStore {
    pub records: BTreeMap<Digest, Record>,
}

impl RecordStore {
    pub fn insert(&mut self, record: Record) {
        self.records.insert(record.said.clone(), record);
    }

    /// Record SAIDs matching every criterion, in digest order.
    pub fn search(&self, criteria: &[Criterion]) -> Vec<Digest> {
        self.records
            .values()
            .filter(|r| criteria.iter().all(|c| c.matches(r)))
            .map(|r| r.said.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestState {
    Queued,
    Approved,
    Rejected,
}

/// An incoming search request awaiting screening.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataRequest {
    pub id: String,
    pub requester: PrincipalId,
    pub criteria: Vec<Criterion>,
    pub purpose: String,
    pub state: RequestState,
}

/// Screen a queued request: approve iff the requester is reputable and the
/// applicable rules allow it. The transition is anchored either way.
pub fn screen_request(
    world: &World,
    req: &DataRequest,
    registry: &ActorRegistry,
    rules: &[ResolvedRule],
    ctx: &RequestContext,
    logs: &mut LogStore,
    keyring: &Keyring,
) -> Result<(DataRequest, Decision), GovError> {
    if req.state != RequestState::Queued {
        return Err(GovError::AlreadyScreened);
    }
    let decision = evaluate(rules, ctx);
    let approved =
        registry.reputable.contains(&req.requester) && decision.outcome == Outcome::Allow;
    let mut out = req.clone();
    out.state = if approved {
        RequestState::Approved
    } else {
        RequestState::Rejected
    };
    anchor_gov_act(
        world,
        &registry.administration,
        &GovAct::RequestScreened {
            request: req.id.clone(),
            approved,
        },
        logs,
        keyring,
    )?;
    Ok((out, decision))
}

#[cfg(test)]
#[path = "governance_tests.rs"]
mod tests;
