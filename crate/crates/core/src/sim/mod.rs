//! Deterministic discrete-event harness wiring every module together.
//!
//! A scenario is a script of scheduled actions over symbolic actor names.
//! The loop processes ticks in non-decreasing order, ties broken by
//! (actor name, insertion order), and records one transcript line per
//! action. Nothing reads wall-clock time or ambient randomness: the seed
//! drives every key, identifier, and therefore every byte of the
//! transcript.

mod scenarios;

pub use scenarios::{scenario_assertions, scenario_events, Scenario};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;

use crate::authenticity::{
    incept, public_keys, AuthError, CausalGraph, CausalOrder, KeyEventLog, Keyring, LogStore,
    WitnessKeys, WitnessReceipt,
};
use crate::canonical::{canonical_bytes, sha256_hex, CanonicalError, Digest};
use crate::comms::{CommsError, ConfidentialityLevel, MessageMode};
use crate::governance::{
    evaluate, publish_amendment, resolve_jurisdictions, Amendment, AmendmentChange,
    AssuranceLevel, Decision, Effect, GovError, GovernanceState, Outcome, PartyStatus,
    PolicyRule, RecordStore, RequestContext, RuleMatch, Treaty, Verification,
};
use crate::model::{
    ulid, Administration, EcosystemId, LegitimateAuthority, ModelError, PrincipalId,
    PrincipalKind, World,
};
use crate::semantics::{
    add_overlay, AttrType, CaptureBase, ConformanceRule, Credential, Overlay, OverlayKind,
    Record, SemanticBundle, SemanticsError,
};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("unknown actor {0:?}")]
    UnknownActor(String),
    #[error("unknown ecosystem alias {0:?}")]
    UnknownEcosystemAlias(String),
    #[error("unknown schema {0:?}")]
    UnknownSchema(String),
    #[error("unknown record {0:?}")]
    UnknownRecord(String),
    #[error("unknown treaty {0:?}")]
    UnknownTreaty(String),
    #[error("CausalityViolation: {0}")]
    Causality(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Comms(#[from] CommsError),
    #[error(transparent)]
    Gov(#[from] GovError),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
}

impl SimError {
    fn kind(&self) -> &'static str {
        match self {
            SimError::UnknownScenario(_) => "UnknownScenario",
            SimError::UnknownActor(_) => "UnknownActor",
            SimError::UnknownEcosystemAlias(_) => "UnknownEcosystemAlias",
            SimError::UnknownSchema(_) => "UnknownSchema",
            SimError::UnknownRecord(_) => "UnknownRecord",
            SimError::UnknownTreaty(_) => "UnknownTreaty",
            SimError::Causality(_) => "CausalityViolation",
            SimError::Model(_) => "Model",
            SimError::Comms(_) => "Comms",
            SimError::Gov(_) => "Governance",
            SimError::Auth(_) => "Authenticity",
            SimError::Semantics(_) => "Semantics",
            SimError::Canonical(_) => "Canonical",
        }
    }
}

/// Declarative rule used in scenario scripts; ecosystem names resolve at
/// execution time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub id: String,
    pub scope: String,
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
    pub effect: Effect,
}

impl RuleSpec {
    fn build(&self, scope: EcosystemId) -> PolicyRule {
        PolicyRule::new(
            self.id.clone(),
            scope,
            RuleMatch {
                sender_kind: self.sender_kind,
                receiver_kind: self.receiver_kind,
                level: self.level,
                purpose: self.purpose.clone(),
                sensitive: self.sensitive,
            },
            self.effect.clone(),
        )
    }
}

/// One module operation, closed over script-level names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Action {
    Incept {
        kind: PrincipalKind,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        pre_provisioned: bool,
    },
    LiftEcosystem {
        name: String,
    },
    CreateEcosystem {
        name: String,
        founders: Vec<String>,
        representative: String,
        admin: String,
    },
    DefineSchema {
        name: String,
        attributes: BTreeMap<String, AttrType>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        flagged: Vec<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        required: Vec<String>,
    },
    IssueRecord {
        name: String,
        schema: String,
        values: BTreeMap<String, Value>,
        subject: String,
    },
    WitnessLog {
        target: String,
    },
    InstallTreaty {
        id: String,
        administrator: String,
        parties: Vec<String>,
        scope: Vec<String>,
        rules: Vec<RuleSpec>,
    },
    AddLocalRule {
        ecosystem: String,
        rule: RuleSpec,
    },
    AmendRegistry {
        treaty: String,
        party: String,
        status: PartyStatus,
    },
    PresentCredential {
        credential: String,
        verifier: String,
        purpose: String,
        level: ConfidentialityLevel,
    },
    EvaluateExchange {
        sender: String,
        receiver: String,
        purpose: String,
        level: ConfidentialityLevel,
        payload: String,
    },
    OpenConnection {
        with: String,
        level: ConfidentialityLevel,
    },
    SendMessage {
        with: String,
        connection_level: ConfidentialityLevel,
        level: ConfidentialityLevel,
        payload: String,
    },
    IssueCertificate {
        name: String,
        schema: String,
        values: BTreeMap<String, Value>,
        subject: String,
        attestation: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        link_attribute: Option<String>,
    },
    AnchorAck {
        of: String,
    },
    Inspect,
}

impl Action {
    fn op_name(&self) -> &'static str {
        match self {
            Action::Incept { .. } => "incept",
            Action::LiftEcosystem { .. } => "lift_ecosystem",
            Action::CreateEcosystem { .. } => "create_ecosystem",
            Action::DefineSchema { .. } => "define_schema",
            Action::IssueRecord { .. } => "issue_record",
            Action::WitnessLog { .. } => "witness_log",
            Action::InstallTreaty { .. } => "install_treaty",
            Action::AddLocalRule { .. } => "add_local_rule",
            Action::AmendRegistry { .. } => "amend_registry",
            Action::PresentCredential { .. } => "present_credential",
            Action::EvaluateExchange { .. } => "evaluate_exchange",
            Action::OpenConnection { .. } => "open_connection",
            Action::SendMessage { .. } => "send_message",
            Action::IssueCertificate { .. } => "issue_certificate",
            Action::AnchorAck { .. } => "anchor_ack",
            Action::Inspect => "inspect",
        }
    }
}

/// One scripted step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub tick: u64,
    pub actor: String,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptLine {
    pub tick: u64,
    pub actor: String,
    pub action: Action,
    pub outcome: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssertResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// The full, byte-reproducible record of one scenario run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transcript {
    pub scenario: String,
    pub seed: u64,
    pub lines: Vec<TranscriptLine>,
    pub assertions: Vec<AssertResult>,
    pub world_digest: Digest,
}

impl Transcript {
    /// Newline-delimited canonical JSON: a header line, one line per
    /// action, one per assertion result, and a terminal digest line.
    pub fn to_jsonl(&self) -> Result<Vec<u8>, SimError> {
        let mut out = Vec::new();
        let push = |value: &Value, out: &mut Vec<u8>| -> Result<(), SimError> {
            out.extend_from_slice(&canonical_bytes(value)?);
            out.push(b'\n');
            Ok(())
        };
        push(
            &json!({"scenario": self.scenario, "seed": self.seed}),
            &mut out,
        )?;
        for line in &self.lines {
            push(&serde_json::to_value(line).map_err(|e| {
                SimError::Canonical(CanonicalError::NonCanonicalInput(e.to_string()))
            })?, &mut out)?;
        }
        for result in &self.assertions {
            push(
                &json!({"assert": result.name, "passed": result.passed, "detail": result.detail}),
                &mut out,
            )?;
        }
        push(&json!({"world_digest": self.world_digest}), &mut out)?;
        Ok(out)
    }

    /// Digest over the serialized transcript bytes.
    pub fn digest(&self) -> Result<Digest, SimError> {
        Ok(sha256_hex(&self.to_jsonl()?))
    }

    pub fn all_assertions_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    fn find_line(&self, tick: u64, op: &str) -> Option<&TranscriptLine> {
        self.lines
            .iter()
            .find(|l| l.tick == tick && l.action.op_name() == op)
    }
}

/// A check over transcript contents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub kind: AssertKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum AssertKind {
    /// The outcome field at `path` of the first line matching (tick, op)
    /// equals `expected`.
    OutcomeAt {
        tick: u64,
        op: String,
        path: String,
        expected: Value,
    },
    /// The outcome field at `path` exists on the matching line.
    OutcomePresent { tick: u64, op: String, path: String },
    /// The outcome fields at `path` of two lines differ.
    OutcomesDiffer {
        tick_a: u64,
        tick_b: u64,
        op: String,
        path: String,
    },
    /// The outcome fields at `path` of two lines are equal.
    OutcomesEqual {
        tick_a: u64,
        tick_b: u64,
        op: String,
        path: String,
    },
}

fn lookup<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    let mut current = value;
    for part in path.split('.') {
        current = match current {
            Value::Object(map) => map.get(part)?,
            Value::Array(items) => items.get(part.parse::<usize>().ok()?)?,
            _ => return None,
        };
    }
    Some(current)
}

/// Evaluate assertions against a transcript; each result carries the first
/// violating detail when it fails.
pub fn assert_trace(transcript: &Transcript, assertions: &[Assertion]) -> Vec<AssertResult> {
    assertions
        .iter()
        .map(|assertion| {
            let (passed, detail) = check_assertion(transcript, &assertion.kind);
            AssertResult {
                name: assertion.name.clone(),
                passed,
                detail,
            }
        })
        .collect()
}

fn check_assertion(transcript: &Transcript, kind: &AssertKind) -> (bool, String) {
    let fetch = |tick: u64, op: &str, path: &str| -> Result<Value, String> {
        let line = transcript
            .find_line(tick, op)
            .ok_or_else(|| format!("NotFound: no {op:?} line at tick {tick}"))?;
        lookup(&line.outcome, path)
            .cloned()
            .ok_or_else(|| format!("NotFound: no outcome path {path:?} at tick {tick}"))
    };
    match kind {
        AssertKind::OutcomeAt {
            tick,
            op,
            path,
            expected,
        } => match fetch(*tick, op, path) {
            Ok(found) if found == *expected => (true, String::from("ok")),
            Ok(found) => (false, format!("tick {tick}: expected {expected}, found {found}")),
            Err(detail) => (false, detail),
        },
        AssertKind::OutcomePresent { tick, op, path } => match fetch(*tick, op, path) {
            Ok(_) => (true, String::from("ok")),
            Err(detail) => (false, detail),
        },
        AssertKind::OutcomesDiffer {
            tick_a,
            tick_b,
            op,
            path,
        } => match (fetch(*tick_a, op, path), fetch(*tick_b, op, path)) {
            (Ok(a), Ok(b)) if a != b => (true, String::from("ok")),
            (Ok(a), Ok(_)) => (false, format!("values are identical: {a}")),
            (Err(detail), _) | (_, Err(detail)) => (false, detail),
        },
        AssertKind::OutcomesEqual {
            tick_a,
            tick_b,
            op,
            path,
        } => match (fetch(*tick_a, op, path), fetch(*tick_b, op, path)) {
            (Ok(a), Ok(b)) if a == b => (true, String::from("ok")),
            (Ok(a), Ok(b)) => (false, format!("values differ: {a} vs {b}")),
            (Err(detail), _) | (_, Err(detail)) => (false, detail),
        },
    }
}

/// Live state of one simulation run.
pub struct Simulation {
    pub world: World,
    pub logs: LogStore,
    pub keyring: Keyring,
    pub gov: GovernanceState,
    pub actors: BTreeMap<String, PrincipalId>,
    pub ecosystems: BTreeMap<String, EcosystemId>,
    pub bundles: BTreeMap<String, SemanticBundle>,
    pub records: BTreeMap<String, Record>,
    pub credentials: BTreeMap<String, Credential>,
    pub named_events: BTreeMap<String, Digest>,
    pub receipts: BTreeMap<Digest, Vec<WitnessReceipt>>,
    pub witness_keys: WitnessKeys,
    pub stores: BTreeMap<EcosystemId, RecordStore>,
    rng: ChaCha20Rng,
}

impl Simulation {
    pub fn new(seed: u64) -> Self {
        Simulation {
            world: World::new(),
            logs: LogStore::new(),
            keyring: Keyring::new(),
            gov: GovernanceState::new(),
            actors: BTreeMap::new(),
            ecosystems: BTreeMap::new(),
            bundles: BTreeMap::new(),
            records: BTreeMap::new(),
            credentials: BTreeMap::new(),
            named_events: BTreeMap::new(),
            receipts: BTreeMap::new(),
            witness_keys: WitnessKeys::empty(),
            stores: BTreeMap::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    fn actor(&self, name: &str) -> Result<PrincipalId, SimError> {
        self.actors
            .get(name)
            .cloned()
            .ok_or_else(|| SimError::UnknownActor(name.to_owned()))
    }

    fn eco(&self, name: &str) -> Result<EcosystemId, SimError> {
        self.ecosystems
            .get(name)
            .cloned()
            .ok_or_else(|| SimError::UnknownEcosystemAlias(name.to_owned()))
    }

    fn bundle(&self, name: &str) -> Result<&SemanticBundle, SimError> {
        self.bundles
            .get(name)
            .ok_or_else(|| SimError::UnknownSchema(name.to_owned()))
    }

    fn record(&self, name: &str) -> Result<&Record, SimError> {
        self.records
            .get(name)
            .ok_or_else(|| SimError::UnknownRecord(name.to_owned()))
    }

    /// A payload is sensitive when any captured value sits under a flagged
    /// attribute of its bundle.
    fn is_sensitive(&self, record: &Record) -> bool {
        self.bundles
            .values()
            .find(|b| b.bundle_said == record.bundle_said)
            .map_or(false, |b| {
                b.capture_base
                    .flagged
                    .iter()
                    .any(|attr| record.values.contains_key(attr))
            })
    }

    fn request_context(
        &self,
        sender: &PrincipalId,
        receiver: &PrincipalId,
        purpose: &str,
        level: ConfidentialityLevel,
        payload: &Record,
    ) -> Result<RequestContext, SimError> {
        Ok(RequestContext {
            sender_kind: self.world.principal(sender)?.kind,
            receiver_kind: self.world.principal(receiver)?.kind,
            level,
            purpose: purpose.to_owned(),
            sensitive: self.is_sensitive(payload),
        })
    }

    /// Resolve, evaluate, and (when demanded) verify assurance for an
    /// exchange. Returns the decision, the verification outcome, and the
    /// final effective outcome.
    fn decide(
        &self,
        sender: &PrincipalId,
        receiver: &PrincipalId,
        purpose: &str,
        level: ConfidentialityLevel,
        payload: &Record,
    ) -> Result<(Decision, Option<Verification>, Outcome), SimError> {
        let rules = resolve_jurisdictions(&self.world, &self.gov, sender, receiver, purpose)?;
        let ctx = self.request_context(sender, receiver, purpose, level, payload)?;
        let decision = evaluate(&rules, &ctx);
        let (verification, outcome) = if decision.outcome == Outcome::Allow
            && decision.required_assurance > AssuranceLevel::L0
        {
            let receipts = self
                .receipts
                .get(sender.digest())
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            let verification = crate::governance::verify_counterparty(
                &self.world,
                &self.logs,
                sender,
                decision.required_assurance,
                receipts,
                &self.witness_keys,
            )?;
            let outcome = match verification {
                Verification::Met => Outcome::Allow,
                Verification::NotMet => Outcome::Deny,
            };
            (Some(verification), outcome)
        } else {
            (None, decision.outcome)
        };
        Ok((decision, verification, outcome))
    }

    fn fresh_ecosystem_id(&mut self, tick: u64) -> EcosystemId {
        let mut entropy = [0u8; 10];
        self.rng.fill_bytes(&mut entropy);
        EcosystemId::new(ulid(tick, entropy))
    }

    fn apply(&mut self, tick: u64, actor_name: &str, action: &Action) -> Result<Value, SimError> {
        match action {
            Action::Incept {
                kind,
                pre_provisioned,
            } => {
                let (signing, next) = Keyring::mint(&mut self.rng);
                let (prefix, event) = incept(&signing, &public_keys(&next))?;
                self.keyring.remember(prefix.clone(), &signing, &next);
                self.logs.insert(KeyEventLog::from_inception(event.clone())?);
                let (world, principal) = self.world.register_principal(*kind, &event)?;
                self.world = world;
                self.actors.insert(actor_name.to_owned(), principal.id.clone());
                let mut outcome = json!({"principal": principal.id, "kind": kind});
                if *pre_provisioned {
                    outcome["note"] = json!("pre-provisioned inception");
                }
                Ok(outcome)
            }
            Action::LiftEcosystem { name } => {
                let p = self.actor(actor_name)?;
                let (world, eco) = self.world.lift_to_ecosystem(&p)?;
                self.world = world;
                self.ecosystems.insert(name.clone(), eco.id.clone());
                Ok(json!({"ecosystem": eco.id, "population": eco.population_size()}))
            }
            Action::CreateEcosystem {
                name,
                founders,
                representative,
                admin,
            } => {
                let founder_ids = founders
                    .iter()
                    .map(|f| self.actor(f))
                    .collect::<Result<std::collections::BTreeSet<_>, _>>()?;
                let rep = self.actor(representative)?;
                let admin_id = self.actor(admin)?;
                let eco_id = self.fresh_ecosystem_id(tick);
                let (world, eco, anchored) = self.world.create_ecosystem(
                    eco_id,
                    &founder_ids,
                    LegitimateAuthority::of([rep]),
                    Administration::of([admin_id.clone()], admin_id.digest().clone()),
                    &mut self.logs,
                    &self.keyring,
                )?;
                self.world = world;
                self.ecosystems.insert(name.clone(), eco.id.clone());
                self.stores.entry(eco.id.clone()).or_default();
                Ok(json!({
                    "ecosystem": eco.id,
                    "population": eco.population_size(),
                    "act_digest": anchored.digest,
                }))
            }
            Action::DefineSchema {
                name,
                attributes,
                flagged,
                required,
            } => {
                let base = CaptureBase::new(
                    attributes.clone(),
                    flagged.iter().cloned().collect(),
                )?;
                let mut bundle = SemanticBundle::new(base)?;
                if !required.is_empty() {
                    let content = required
                        .iter()
                        .map(|attr| {
                            let rule = ConformanceRule {
                                required: true,
                                allowed: None,
                            };
                            Ok((attr.clone(), serde_json::to_value(rule).map_err(|e| {
                                SimError::Canonical(CanonicalError::NonCanonicalInput(
                                    e.to_string(),
                                ))
                            })?))
                        })
                        .collect::<Result<BTreeMap<_, _>, SimError>>()?;
                    let overlay = Overlay::new(
                        OverlayKind::Conformance,
                        None,
                        &bundle.capture_base,
                        content,
                    )?;
                    bundle = add_overlay(&bundle, overlay)?;
                }
                let said = bundle.bundle_said.clone();
                self.bundles.insert(name.clone(), bundle);
                Ok(json!({"bundle_said": said}))
            }
            Action::IssueRecord {
                name,
                schema,
                values,
                subject,
            } => {
                let issuer = self.actor(actor_name)?;
                let subject_id = self.actor(subject)?;
                let bundle = self.bundle(schema)?.clone();
                let record = Record::new(
                    bundle.bundle_said.clone(),
                    values.clone().into_iter().collect(),
                )?;
                let violations = crate::semantics::validate_record(&record, &bundle)?;
                if !violations.is_empty() {
                    return Err(SimError::Semantics(SemanticsError::ValidationFailure(
                        violations,
                    )));
                }
                let event =
                    self.logs
                        .anchor(issuer.digest(), &record.said, &self.keyring)?;
                let event_digest = event.event_digest()?;
                let credential = Credential {
                    record_said: record.said.clone(),
                    issuer: issuer.digest().clone(),
                    subject: subject_id.digest().clone(),
                    anchor_event: event_digest.clone(),
                    claims: record
                        .values
                        .iter()
                        .map(|(attribute, value)| crate::semantics::Claim {
                            attribute: attribute.clone(),
                            value: value.clone(),
                        })
                        .collect(),
                };
                self.named_events.insert(name.clone(), event_digest.clone());
                self.records.insert(name.clone(), record.clone());
                self.credentials.insert(name.clone(), credential);
                for store in self.stores.values_mut() {
                    store.insert(record.clone());
                }
                Ok(json!({
                    "record_said": record.said,
                    "anchor_event": event_digest,
                }))
            }
            Action::WitnessLog { target } => {
                let witness = self.actor(actor_name)?;
                let target_id = self.actor(target)?;
                let log = self
                    .logs
                    .get(target_id.digest())
                    .ok_or_else(|| AuthError::UnknownPrefix(target_id.digest().clone()))?
                    .clone();
                let witness_log = self
                    .logs
                    .get(witness.digest())
                    .ok_or_else(|| AuthError::UnknownPrefix(witness.digest().clone()))?;
                self.witness_keys.insert(
                    witness.digest().clone(),
                    witness_log.events[0].signing_keys.clone(),
                );
                let pair = &self.keyring.signing_pairs(witness.digest()).map_err(|_| {
                    SimError::Auth(AuthError::MissingKeys(witness.digest().clone()))
                })?[0];
                let mut count = 0;
                for event in &log.events {
                    let receipt = WitnessReceipt::sign(
                        witness.digest().clone(),
                        event.event_digest()?,
                        pair,
                    );
                    self.receipts
                        .entry(target_id.digest().clone())
                        .or_default()
                        .push(receipt);
                    count += 1;
                }
                Ok(json!({"receipts": count, "target": target_id}))
            }
            Action::InstallTreaty {
                id,
                administrator,
                parties,
                scope,
                rules,
            } => {
                let admin_eco = self.eco(administrator)?;
                let party_ids = parties
                    .iter()
                    .map(|p| self.eco(p))
                    .collect::<Result<std::collections::BTreeSet<_>, _>>()?;
                let built_rules = rules
                    .iter()
                    .map(|spec| Ok(spec.build(self.eco(&spec.scope)?)))
                    .collect::<Result<Vec<_>, SimError>>()?;
                let treaty = Treaty {
                    id: id.clone(),
                    administrator: admin_eco,
                    parties: party_ids,
                    scope: scope.iter().cloned().collect(),
                    rules: built_rules,
                };
                self.gov.install_treaty(treaty, tick);
                let mut world = self.world.clone();
                world.agreements.insert(id.clone());
                self.world = world;
                Ok(json!({"treaty": id, "version": 0}))
            }
            Action::AddLocalRule { ecosystem, rule } => {
                let eco = self.eco(ecosystem)?;
                let built = rule.build(eco.clone());
                let rule_id = built.id.clone();
                self.gov.add_local_rule(built);
                Ok(json!({"ecosystem": eco, "rule": rule_id}))
            }
            Action::AmendRegistry {
                treaty,
                party,
                status,
            } => {
                let party_eco = self.eco(party)?;
                let registry = self
                    .gov
                    .registries
                    .get(treaty)
                    .ok_or_else(|| SimError::UnknownTreaty(treaty.clone()))?
                    .clone();
                let admin_eco = self
                    .gov
                    .treaties
                    .get(treaty)
                    .ok_or_else(|| SimError::UnknownTreaty(treaty.clone()))?
                    .administrator
                    .clone();
                let admin_kel = self
                    .world
                    .ecosystem(&admin_eco)?
                    .administration
                    .admin_kel
                    .clone();
                let amendment = Amendment {
                    party: party_eco,
                    change: AmendmentChange::Status {
                        status: *status,
                        effective: tick,
                    },
                };
                let (updated, notice) = publish_amendment(
                    &registry,
                    amendment,
                    &admin_kel,
                    &mut self.logs,
                    &self.keyring,
                )?;
                self.gov.registries.insert(treaty.clone(), updated);
                Ok(json!({"notice": notice}))
            }
            Action::PresentCredential {
                credential,
                verifier,
                purpose,
                level,
            } => {
                let presenter = self.actor(actor_name)?;
                let verifier_id = self.actor(verifier)?;
                let cred = self
                    .credentials
                    .get(credential)
                    .ok_or_else(|| SimError::UnknownRecord(credential.clone()))?
                    .clone();
                let issuer_log = self
                    .logs
                    .get(&cred.issuer)
                    .ok_or_else(|| AuthError::UnknownPrefix(cred.issuer.clone()))?;
                cred.verify_binding(issuer_log)?;
                let record = self.record(credential)?.clone();
                let (decision, verification, outcome) =
                    self.decide(&presenter, &verifier_id, purpose, *level, &record)?;
                Ok(json!({
                    "payload_digest": record.said,
                    "decision": decision,
                    "verification": verification,
                    "outcome": outcome,
                }))
            }
            Action::EvaluateExchange {
                sender,
                receiver,
                purpose,
                level,
                payload,
            } => {
                let sender_id = self.actor(sender)?;
                let receiver_id = self.actor(receiver)?;
                let record = self.record(payload)?.clone();
                let (decision, verification, outcome) =
                    self.decide(&sender_id, &receiver_id, purpose, *level, &record)?;
                Ok(json!({
                    "payload_digest": record.said,
                    "decision": decision,
                    "verification": verification,
                    "outcome": outcome,
                }))
            }
            Action::OpenConnection { with, level } => {
                let a = self.actor(actor_name)?;
                let b = self.actor(with)?;
                let (world, conn) = self.world.open_connection(&a, &b, *level)?;
                self.world = world;
                Ok(json!({"connection": conn.id, "level": conn.level}))
            }
            Action::SendMessage {
                with,
                connection_level,
                level,
                payload,
            } => {
                let sender = self.actor(actor_name)?;
                let peer = self.actor(with)?;
                let record = self.record(payload)?.clone();
                let (world, conn) =
                    self.world.open_connection(&sender, &peer, *connection_level)?;
                let (world, message) = world.send_message(
                    &conn.id,
                    &sender,
                    *level,
                    record.said.clone(),
                    MessageMode::Active,
                )?;
                self.world = world;
                Ok(json!({"message": message.id, "logical_time": message.logical_time}))
            }
            Action::IssueCertificate {
                name,
                schema,
                values,
                subject,
                attestation,
                link_attribute,
            } => {
                let issuer = self.actor(actor_name)?;
                let subject_id = self.actor(subject)?;
                let attestation_event = self
                    .named_events
                    .get(attestation)
                    .cloned()
                    .ok_or_else(|| {
                        SimError::Causality(format!(
                            "attestation {attestation:?} has not been anchored"
                        ))
                    })?;
                let attestation_record = self.record(attestation)?.clone();
                let bundle = self.bundle(schema)?.clone();
                let mut record_values: BTreeMap<String, Value> =
                    values.clone().into_iter().collect();
                if let Some(attr) = link_attribute {
                    record_values.insert(
                        attr.clone(),
                        json!(attestation_record.said.as_str()),
                    );
                }
                let record = Record::new(bundle.bundle_said.clone(), record_values)?;
                let violations = crate::semantics::validate_record(&record, &bundle)?;
                if !violations.is_empty() {
                    return Err(SimError::Semantics(SemanticsError::ValidationFailure(
                        violations,
                    )));
                }
                // The issuance event seals both the certificate and the
                // attestation event it depends on.
                let event = self.logs.anchor_all(
                    issuer.digest(),
                    &[record.said.clone(), attestation_event.clone()],
                    &self.keyring,
                )?;
                let issuance_digest = event.event_digest()?;
                let graph = CausalGraph::from_logs(
                    &self.logs.iter().collect::<Vec<_>>(),
                )?;
                let order = graph.happened_before(&attestation_event, &issuance_digest)?;
                if order != CausalOrder::Before {
                    return Err(SimError::Causality(format!(
                        "attestation is not causally before issuance: {order:?}"
                    )));
                }
                let credential = Credential {
                    record_said: record.said.clone(),
                    issuer: issuer.digest().clone(),
                    subject: subject_id.digest().clone(),
                    anchor_event: issuance_digest.clone(),
                    claims: Vec::new(),
                };
                self.named_events.insert(name.clone(), issuance_digest.clone());
                self.records.insert(name.clone(), record.clone());
                self.credentials.insert(name.clone(), credential);
                Ok(json!({
                    "issued": true,
                    "certificate_said": record.said,
                    "issuance_event": issuance_digest,
                    "causal": "before",
                }))
            }
            Action::AnchorAck { of } => {
                let p = self.actor(actor_name)?;
                let referenced = self
                    .named_events
                    .get(of)
                    .cloned()
                    .ok_or_else(|| SimError::UnknownRecord(of.clone()))?;
                let event = self
                    .logs
                    .anchor(p.digest(), &referenced, &self.keyring)?;
                let digest = event.event_digest()?;
                self.named_events
                    .insert(format!("{of}-ack-{actor_name}"), digest.clone());
                Ok(json!({"ack_event": digest, "anchored": referenced}))
            }
            Action::Inspect => {
                let political_principals = self
                    .world
                    .principals
                    .values()
                    .filter(|p| p.kind == PrincipalKind::Political)
                    .count();
                Ok(json!({
                    "principals": self.world.principals.len(),
                    "ecosystems": self.world.ecosystems.len(),
                    "things": self.world.things.len(),
                    "political_principals": political_principals,
                    "connections": self.world.connections.len(),
                    "messages": self.world.messages.len(),
                }))
            }
        }
    }

    /// Run a script to completion, producing one transcript line per
    /// scheduled action. Action failures are recorded, not fatal.
    pub fn run(&mut self, mut events: Vec<ScheduledEvent>) -> Result<Vec<TranscriptLine>, SimError> {
        events.sort_by(|a, b| (a.tick, &a.actor).cmp(&(b.tick, &b.actor)));
        let mut lines = Vec::with_capacity(events.len());
        for event in &events {
            let outcome = match self.apply(event.tick, &event.actor, &event.action) {
                Ok(value) => json!({"ok": value}),
                Err(e) => json!({"err": {"kind": e.kind(), "detail": e.to_string()}}),
            };
            lines.push(TranscriptLine {
                tick: event.tick,
                actor: event.actor.clone(),
                action: event.action.clone(),
                outcome,
            });
        }
        Ok(lines)
    }

    /// Export the terminal state as fixture files: the world document, the
    /// full rule list, and one signatory registry per treaty.
    pub fn fixtures(&self, scenario: &str) -> Result<Vec<(String, Vec<u8>)>, SimError> {
        let mut files = Vec::new();
        files.push((
            format!("{scenario}.world.json"),
            self.world.to_canonical_json()?,
        ));
        let mut rules: Vec<&PolicyRule> = self
            .gov
            .local_rules
            .values()
            .flatten()
            .chain(self.gov.treaties.values().flat_map(|t| t.rules.iter()))
            .collect();
        rules.sort();
        files.push((format!("{scenario}.policy.json"), canonical_bytes(&rules)?));
        for (id, registry) in &self.gov.registries {
            files.push((
                format!("{scenario}.{id}.registry.json"),
                canonical_bytes(registry)?,
            ));
        }
        Ok(files)
    }
}

/// Execute a named scenario under a seed: run the script, evaluate the
/// scenario's assertions, and seal the transcript with the terminal world
/// digest.
pub fn run_scenario(name: &str, seed: u64) -> Result<Transcript, SimError> {
    run_scenario_with_state(name, seed).map(|(transcript, _)| transcript)
}

/// Run a scenario and also hand back the terminal simulation state, for
/// fixture export and deeper checks.
pub fn run_scenario_with_state(
    name: &str,
    seed: u64,
) -> Result<(Transcript, Simulation), SimError> {
    let scenario = Scenario::parse(name)?;
    let mut sim = Simulation::new(seed);
    let lines = sim.run(scenario_events(scenario))?;
    let mut transcript = Transcript {
        scenario: scenario.name().to_owned(),
        seed,
        lines,
        assertions: Vec::new(),
        world_digest: sim.world.digest()?,
    };
    transcript.assertions = assert_trace(&transcript, &scenario_assertions(scenario));
    Ok((transcript, sim))
}

#[cfg(test)]
#[path = "sim_tests.rs"]
mod tests;
