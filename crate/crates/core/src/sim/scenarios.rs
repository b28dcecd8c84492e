//! The scripted scenarios: passport portability with asymmetric usage,
//! birth attestation causality (state and stateless variants), and
//! multi-jurisdiction corporate messaging.

use serde_json::json;
use std::collections::BTreeMap;

use super::{Action, AssertKind, Assertion, RuleSpec, ScheduledEvent, SimError};
use crate::comms::ConfidentialityLevel;
use crate::governance::{AssuranceLevel, Effect, PartyStatus};
use crate::model::PrincipalKind;
use crate::semantics::AttrType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Passport,
    BirthAttestation,
    BirthAttestationHumanitarian,
    MultiJurisdiction,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Passport,
        Scenario::BirthAttestation,
        Scenario::BirthAttestationHumanitarian,
        Scenario::MultiJurisdiction,
    ];

    pub fn parse(name: &str) -> Result<Scenario, SimError> {
        match name {
            "passport" => Ok(Scenario::Passport),
            "birth_attestation" => Ok(Scenario::BirthAttestation),
            "birth_attestation_humanitarian" => Ok(Scenario::BirthAttestationHumanitarian),
            "multi_jurisdiction" => Ok(Scenario::MultiJurisdiction),
            other => Err(SimError::UnknownScenario(other.to_owned())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Passport => "passport",
            Scenario::BirthAttestation => "birth_attestation",
            Scenario::BirthAttestationHumanitarian => "birth_attestation_humanitarian",
            Scenario::MultiJurisdiction => "multi_jurisdiction",
        }
    }
}

fn at(tick: u64, actor: &str, action: Action) -> ScheduledEvent {
    ScheduledEvent {
        tick,
        actor: actor.to_owned(),
        action,
    }
}

fn attrs(pairs: &[(&str, AttrType)]) -> BTreeMap<String, AttrType> {
    pairs
        .iter()
        .map(|(name, ty)| (name.to_string(), *ty))
        .collect()
}

fn values(pairs: &[(&str, serde_json::Value)]) -> BTreeMap<String, serde_json::Value> {
    pairs
        .iter()
        .map(|(name, value)| (name.to_string(), value.clone()))
        .collect()
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// The scripted actions of a scenario, in schedule order.
pub fn scenario_events(scenario: Scenario) -> Vec<ScheduledEvent> {
    match scenario {
        Scenario::Passport => passport_events(),
        Scenario::BirthAttestation => birth_events(),
        Scenario::BirthAttestationHumanitarian => humanitarian_events(),
        Scenario::MultiJurisdiction => multi_jurisdiction_events(),
    }
}

/// The assertions checked over a scenario's transcript.
pub fn scenario_assertions(scenario: Scenario) -> Vec<Assertion> {
    match scenario {
        Scenario::Passport => passport_assertions(),
        Scenario::BirthAttestation => birth_assertions(),
        Scenario::BirthAttestationHumanitarian => humanitarian_assertions(),
        Scenario::MultiJurisdiction => multi_jurisdiction_assertions(),
    }
}

fn passport_events() -> Vec<ScheduledEvent> {
    let mut events = vec![
        at(0, "citizen", Action::Incept { kind: PrincipalKind::Individual, pre_provisioned: false }),
        at(0, "alpha-gov", Action::Incept { kind: PrincipalKind::Political, pre_provisioned: false }),
        at(0, "beta-gov", Action::Incept { kind: PrincipalKind::Political, pre_provisioned: false }),
        at(0, "icao", Action::Incept { kind: PrincipalKind::Organisation, pre_provisioned: false }),
        at(0, "w1", Action::Incept { kind: PrincipalKind::Organisation, pre_provisioned: false }),
        at(0, "w2", Action::Incept { kind: PrincipalKind::Organisation, pre_provisioned: false }),
        at(1, "alpha-gov", Action::CreateEcosystem {
            name: "alpha".into(),
            founders: strings(&["citizen", "alpha-gov"]),
            representative: "alpha-gov".into(),
            admin: "alpha-gov".into(),
        }),
        at(1, "beta-gov", Action::CreateEcosystem {
            name: "beta".into(),
            founders: strings(&["beta-gov"]),
            representative: "beta-gov".into(),
            admin: "beta-gov".into(),
        }),
        at(1, "icao", Action::CreateEcosystem {
            name: "icao-eco".into(),
            founders: strings(&["icao"]),
            representative: "icao".into(),
            admin: "icao".into(),
        }),
        at(2, "alpha-gov", Action::DefineSchema {
            name: "passport".into(),
            attributes: attrs(&[
                ("full_name", AttrType::Text),
                ("date_of_birth", AttrType::Date),
                ("passport_no", AttrType::Text),
                ("nationality", AttrType::Text),
            ]),
            flagged: strings(&["full_name", "date_of_birth", "passport_no"]),
            required: strings(&["passport_no"]),
        }),
        at(3, "alpha-gov", Action::IssueRecord {
            name: "citizen-passport".into(),
            schema: "passport".into(),
            values: values(&[
                ("full_name", json!("Nour Haddad")),
                ("date_of_birth", json!("1990-04-12")),
                ("passport_no", json!("A1234567")),
                ("nationality", json!("alpha")),
            ]),
            subject: "citizen".into(),
        }),
        at(4, "w1", Action::WitnessLog { target: "citizen".into() }),
        at(4, "w2", Action::WitnessLog { target: "citizen".into() }),
        at(5, "alpha-gov", Action::AddLocalRule {
            ecosystem: "alpha".into(),
            rule: RuleSpec {
                id: "al-protect".into(),
                scope: "alpha".into(),
                sender_kind: None,
                receiver_kind: None,
                level: None,
                purpose: Some("citizen-protection".into()),
                sensitive: None,
                effect: Effect::Allow,
            },
        }),
        at(5, "icao", Action::InstallTreaty {
            id: "icao-pact".into(),
            administrator: "icao-eco".into(),
            parties: strings(&["alpha", "beta"]),
            scope: strings(&["border-control", "citizen-protection"]),
            rules: vec![
                RuleSpec {
                    id: "pr-recognise".into(),
                    scope: "beta".into(),
                    sender_kind: Some(PrincipalKind::Individual),
                    receiver_kind: None,
                    level: None,
                    purpose: Some("border-control".into()),
                    sensitive: None,
                    effect: Effect::RequireAssurance(AssuranceLevel::L2),
                },
                RuleSpec {
                    id: "pr-protect".into(),
                    scope: "alpha".into(),
                    sender_kind: Some(PrincipalKind::Individual),
                    receiver_kind: None,
                    level: None,
                    purpose: Some("citizen-protection".into()),
                    sensitive: None,
                    effect: Effect::Allow,
                },
            ],
        }),
        at(6, "icao", Action::AmendRegistry {
            treaty: "icao-pact".into(),
            party: "alpha".into(),
            status: PartyStatus::InForce,
        }),
        at(7, "citizen", Action::PresentCredential {
            credential: "citizen-passport".into(),
            verifier: "beta-gov".into(),
            purpose: "border-control".into(),
            level: ConfidentialityLevel::Private,
        }),
        at(8, "icao", Action::AmendRegistry {
            treaty: "icao-pact".into(),
            party: "beta".into(),
            status: PartyStatus::InForce,
        }),
        at(9, "citizen", Action::PresentCredential {
            credential: "citizen-passport".into(),
            verifier: "beta-gov".into(),
            purpose: "border-control".into(),
            level: ConfidentialityLevel::Private,
        }),
    ];
    // The same credential evaluated under each side's own purpose.
    events.push(at(10, "alpha-gov", Action::EvaluateExchange {
        sender: "citizen".into(),
        receiver: "alpha-gov".into(),
        purpose: "citizen-protection".into(),
        level: ConfidentialityLevel::Private,
        payload: "citizen-passport".into(),
    }));
    events.push(at(11, "beta-gov", Action::EvaluateExchange {
        sender: "citizen".into(),
        receiver: "beta-gov".into(),
        purpose: "border-control".into(),
        level: ConfidentialityLevel::Private,
        payload: "citizen-passport".into(),
    }));
    events.push(at(12, "icao", Action::Inspect));
    events
}

fn passport_assertions() -> Vec<Assertion> {
    vec![
        Assertion {
            name: "deny-before-treaty-in-force".into(),
            kind: AssertKind::OutcomeAt {
                tick: 7,
                op: "present_credential".into(),
                path: "ok.outcome".into(),
                expected: json!("deny"),
            },
        },
        Assertion {
            name: "allow-after-treaty-in-force".into(),
            kind: AssertKind::OutcomeAt {
                tick: 9,
                op: "present_credential".into(),
                path: "ok.outcome".into(),
                expected: json!("allow"),
            },
        },
        Assertion {
            name: "required-assurance-l2".into(),
            kind: AssertKind::OutcomeAt {
                tick: 9,
                op: "present_credential".into(),
                path: "ok.decision.required_assurance".into(),
                expected: json!("l2"),
            },
        },
        Assertion {
            name: "assurance-verified".into(),
            kind: AssertKind::OutcomeAt {
                tick: 9,
                op: "present_credential".into(),
                path: "ok.verification".into(),
                expected: json!("met"),
            },
        },
        Assertion {
            name: "same-credential-both-sides".into(),
            kind: AssertKind::OutcomesEqual {
                tick_a: 10,
                tick_b: 11,
                op: "evaluate_exchange".into(),
                path: "ok.payload_digest".into(),
            },
        },
        Assertion {
            name: "asymmetric-decision-traces".into(),
            kind: AssertKind::OutcomesDiffer {
                tick_a: 10,
                tick_b: 11,
                op: "evaluate_exchange".into(),
                path: "ok.decision.trace".into(),
            },
        },
    ]
}

fn birth_certificate_schema(actor: &'static str) -> ScheduledEvent {
    at(2, actor, Action::DefineSchema {
        name: "birth-certificate".into(),
        attributes: attrs(&[
            ("newborn_name", AttrType::Text),
            ("born_on", AttrType::Date),
            ("registry_no", AttrType::Text),
            ("attestation_ref", AttrType::DigestReference),
        ]),
        flagged: strings(&["newborn_name", "born_on"]),
        required: strings(&["attestation_ref"]),
    })
}

fn attestation_schema(actor: &'static str) -> ScheduledEvent {
    at(2, actor, Action::DefineSchema {
        name: "birth-attestation".into(),
        attributes: attrs(&[
            ("newborn_name", AttrType::Text),
            ("born_on", AttrType::Date),
            ("place", AttrType::Text),
        ]),
        flagged: strings(&["newborn_name", "born_on"]),
        required: strings(&[]),
    })
}

fn attestation_record(tick: u64) -> ScheduledEvent {
    at(tick, "clinic", Action::IssueRecord {
        name: "attestation".into(),
        schema: "birth-attestation".into(),
        values: values(&[
            ("newborn_name", json!("Sami")),
            ("born_on", json!("2022-11-03")),
            ("place", json!("field clinic 7")),
        ]),
        subject: "mother".into(),
    })
}

fn certificate_issue(tick: u64, actor: &'static str, name: &str) -> ScheduledEvent {
    at(tick, actor, Action::IssueCertificate {
        name: name.into(),
        schema: "birth-certificate".into(),
        values: values(&[
            ("newborn_name", json!("Sami")),
            ("born_on", json!("2022-11-03")),
            ("registry_no", json!("BC-0001")),
        ]),
        subject: "mother".into(),
        attestation: "attestation".into(),
        link_attribute: Some("attestation_ref".into()),
    })
}

fn birth_events() -> Vec<ScheduledEvent> {
    vec![
        at(0, "mother", Action::Incept { kind: PrincipalKind::Individual, pre_provisioned: false }),
        at(0, "clinic", Action::Incept { kind: PrincipalKind::Organisation, pre_provisioned: false }),
        at(0, "state", Action::Incept { kind: PrincipalKind::Political, pre_provisioned: false }),
        at(1, "clinic", Action::CreateEcosystem {
            name: "clinic-eco".into(),
            founders: strings(&["clinic", "mother"]),
            representative: "clinic".into(),
            admin: "clinic".into(),
        }),
        at(1, "state", Action::CreateEcosystem {
            name: "state-eco".into(),
            founders: strings(&["state", "mother"]),
            representative: "state".into(),
            admin: "state".into(),
        }),
        attestation_schema("clinic"),
        birth_certificate_schema("state"),
        // Reversed injection order: issuance attempted before any
        // attestation exists must be rejected.
        certificate_issue(3, "state", "early-certificate"),
        attestation_record(4),
        certificate_issue(5, "state", "certificate"),
        at(6, "state", Action::Inspect),
    ]
}

fn birth_assertions() -> Vec<Assertion> {
    vec![
        Assertion {
            name: "issuance-before-attestation-rejected".into(),
            kind: AssertKind::OutcomeAt {
                tick: 3,
                op: "issue_certificate".into(),
                path: "err.kind".into(),
                expected: json!("CausalityViolation"),
            },
        },
        Assertion {
            name: "attestation-anchored".into(),
            kind: AssertKind::OutcomePresent {
                tick: 4,
                op: "issue_record".into(),
                path: "ok.anchor_event".into(),
            },
        },
        Assertion {
            name: "issuance-after-attestation-succeeds".into(),
            kind: AssertKind::OutcomeAt {
                tick: 5,
                op: "issue_certificate".into(),
                path: "ok.issued".into(),
                expected: json!(true),
            },
        },
        Assertion {
            name: "attestation-happened-before-issuance".into(),
            kind: AssertKind::OutcomeAt {
                tick: 5,
                op: "issue_certificate".into(),
                path: "ok.causal".into(),
                expected: json!("before"),
            },
        },
    ]
}

fn humanitarian_events() -> Vec<ScheduledEvent> {
    vec![
        // The mother's identity stands in for the biometric root of trust;
        // its inception is pre-provisioned and flagged in the transcript.
        at(0, "mother", Action::Incept { kind: PrincipalKind::Individual, pre_provisioned: true }),
        at(0, "clinic", Action::Incept { kind: PrincipalKind::Organisation, pre_provisioned: false }),
        at(1, "mother", Action::LiftEcosystem { name: "mother-e0".into() }),
        at(1, "clinic", Action::CreateEcosystem {
            name: "clinic-eco".into(),
            founders: strings(&["clinic", "mother"]),
            representative: "clinic".into(),
            admin: "clinic".into(),
        }),
        attestation_schema("clinic"),
        birth_certificate_schema("clinic"),
        attestation_record(3),
        // The mother acknowledges the attestation in her own log: her
        // lowest-level ecosystem is the root of trust.
        at(4, "mother", Action::AnchorAck { of: "attestation".into() }),
        certificate_issue(5, "clinic", "certificate"),
        at(6, "clinic", Action::Inspect),
    ]
}

fn humanitarian_assertions() -> Vec<Assertion> {
    vec![
        Assertion {
            name: "mother-root-of-trust-acknowledged".into(),
            kind: AssertKind::OutcomePresent {
                tick: 4,
                op: "anchor_ack".into(),
                path: "ok.ack_event".into(),
            },
        },
        Assertion {
            name: "certificate-issued-without-state".into(),
            kind: AssertKind::OutcomeAt {
                tick: 5,
                op: "issue_certificate".into(),
                path: "ok.issued".into(),
                expected: json!(true),
            },
        },
        Assertion {
            name: "no-political-principal-present".into(),
            kind: AssertKind::OutcomeAt {
                tick: 6,
                op: "inspect".into(),
                path: "ok.political_principals".into(),
                expected: json!(0),
            },
        },
    ]
}

fn multi_jurisdiction_events() -> Vec<ScheduledEvent> {
    vec![
        at(0, "hq", Action::Incept { kind: PrincipalKind::Organisation, pre_provisioned: false }),
        at(0, "sub-a", Action::Incept { kind: PrincipalKind::Organisation, pre_provisioned: false }),
        at(0, "sub-b", Action::Incept { kind: PrincipalKind::Organisation, pre_provisioned: false }),
        at(0, "gov-a", Action::Incept { kind: PrincipalKind::Political, pre_provisioned: false }),
        at(0, "gov-b", Action::Incept { kind: PrincipalKind::Political, pre_provisioned: false }),
        at(1, "hq", Action::CreateEcosystem {
            name: "corp".into(),
            founders: strings(&["hq", "sub-a", "sub-b"]),
            representative: "hq".into(),
            admin: "hq".into(),
        }),
        at(1, "gov-a", Action::CreateEcosystem {
            name: "country-a".into(),
            founders: strings(&["gov-a", "sub-a"]),
            representative: "gov-a".into(),
            admin: "gov-a".into(),
        }),
        at(1, "gov-b", Action::CreateEcosystem {
            name: "country-b".into(),
            founders: strings(&["gov-b", "sub-b"]),
            representative: "gov-b".into(),
            admin: "gov-b".into(),
        }),
        at(2, "gov-a", Action::AddLocalRule {
            ecosystem: "country-a".into(),
            rule: RuleSpec {
                id: "ra-analytics".into(),
                scope: "country-a".into(),
                sender_kind: None,
                receiver_kind: None,
                level: None,
                purpose: Some("market-analytics".into()),
                sensitive: None,
                effect: Effect::Allow,
            },
        }),
        at(2, "gov-b", Action::AddLocalRule {
            ecosystem: "country-b".into(),
            rule: RuleSpec {
                id: "rb-privacy".into(),
                scope: "country-b".into(),
                sender_kind: None,
                receiver_kind: None,
                level: None,
                purpose: Some("market-analytics".into()),
                sensitive: Some(true),
                effect: Effect::Deny,
            },
        }),
        at(3, "hq", Action::DefineSchema {
            name: "customer-dataset".into(),
            attributes: attrs(&[
                ("customer_email", AttrType::Text),
                ("region", AttrType::Text),
            ]),
            flagged: strings(&["customer_email"]),
            required: strings(&[]),
        }),
        at(4, "hq", Action::IssueRecord {
            name: "dataset".into(),
            schema: "customer-dataset".into(),
            values: values(&[
                ("customer_email", json!("pat@example.com")),
                ("region", json!("emea")),
            ]),
            subject: "hq".into(),
        }),
        at(5, "hq", Action::EvaluateExchange {
            sender: "hq".into(),
            receiver: "sub-a".into(),
            purpose: "market-analytics".into(),
            level: ConfidentialityLevel::Private,
            payload: "dataset".into(),
        }),
        at(6, "hq", Action::EvaluateExchange {
            sender: "hq".into(),
            receiver: "sub-b".into(),
            purpose: "market-analytics".into(),
            level: ConfidentialityLevel::Private,
            payload: "dataset".into(),
        }),
        at(7, "hq", Action::SendMessage {
            with: "sub-a".into(),
            connection_level: ConfidentialityLevel::Private,
            level: ConfidentialityLevel::Private,
            payload: "dataset".into(),
        }),
        at(8, "hq", Action::Inspect),
    ]
}

fn multi_jurisdiction_assertions() -> Vec<Assertion> {
    vec![
        Assertion {
            name: "allowed-under-country-a".into(),
            kind: AssertKind::OutcomeAt {
                tick: 5,
                op: "evaluate_exchange".into(),
                path: "ok.outcome".into(),
                expected: json!("allow"),
            },
        },
        Assertion {
            name: "denied-under-country-b".into(),
            kind: AssertKind::OutcomeAt {
                tick: 6,
                op: "evaluate_exchange".into(),
                path: "ok.outcome".into(),
                expected: json!("deny"),
            },
        },
        Assertion {
            name: "identical-payload-digest".into(),
            kind: AssertKind::OutcomesEqual {
                tick_a: 5,
                tick_b: 6,
                op: "evaluate_exchange".into(),
                path: "ok.payload_digest".into(),
            },
        },
    ]
}
