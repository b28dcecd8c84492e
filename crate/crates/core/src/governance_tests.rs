use super::*;
use crate::model::{Administration, LegitimateAuthority};
use crate::testkit::TestBench;

fn ctx(purpose: &str) -> RequestContext {
    RequestContext {
        sender_kind: PrincipalKind::Individual,
        receiver_kind: PrincipalKind::Political,
        level: ConfidentialityLevel::Private,
        purpose: purpose.into(),
        sensitive: false,
    }
}

/// Two countries, one treaty administered by a third ecosystem, a citizen
/// of A and the government of B. The hand-enumerated oracle fixture.
struct TwoCountry {
    bench: TestBench,
    gov: GovernanceState,
    citizen: PrincipalId,
    gov_b: PrincipalId,
    eco_a: EcosystemId,
    eco_b: EcosystemId,
    admin_c: Digest,
}

fn eco(
    bench: &mut TestBench,
    name: &str,
    members: &[PrincipalId],
    admin: &PrincipalId,
) -> EcosystemId {
    let id = EcosystemId::new(name);
    let founders: std::collections::BTreeSet<_> = members.iter().cloned().collect();
    let (world, _, _) = bench
        .world
        .create_ecosystem(
            id.clone(),
            &founders,
            LegitimateAuthority::of([admin.clone()]),
            Administration::of([admin.clone()], admin.digest().clone()),
            &mut bench.logs,
            &bench.keyring,
        )
        .unwrap();
    bench.world = world;
    id
}

fn two_country(seed: u64) -> TwoCountry {
    let mut bench = TestBench::new(seed);
    let citizen = bench.principal(PrincipalKind::Individual);
    let gov_a = bench.principal(PrincipalKind::Political);
    let gov_b = bench.principal(PrincipalKind::Political);
    let org_c = bench.principal(PrincipalKind::Organisation);
    let eco_a = eco(&mut bench, "country-a", &[citizen.clone(), gov_a.clone()], &gov_a);
    let eco_b = eco(&mut bench, "country-b", &[gov_b.clone()], &gov_b);
    let eco_c = eco(&mut bench, "union-c", &[org_c.clone()], &org_c);

    let mut gov = GovernanceState::new();
    gov.add_local_rule(PolicyRule::new(
        "a-protect",
        eco_a.clone(),
        RuleMatch::for_purpose("citizen-protection"),
        Effect::Allow,
    ));
    gov.add_local_rule(PolicyRule::new(
        "b-screen",
        eco_b.clone(),
        RuleMatch {
            purpose: Some("border-control".into()),
            sensitive: Some(true),
            ..RuleMatch::default()
        },
        Effect::Deny,
    ));
    let treaty = Treaty {
        id: "pact".into(),
        administrator: eco_c,
        parties: [eco_a.clone(), eco_b.clone()].into_iter().collect(),
        scope: ["border-control".to_string()].into_iter().collect(),
        rules: vec![
            PolicyRule::new(
                "t-recognise",
                eco_b.clone(),
                RuleMatch::for_purpose("border-control"),
                Effect::RequireAssurance(AssuranceLevel::L2),
            ),
            PolicyRule::new(
                "t-biometrics",
                eco_b.clone(),
                RuleMatch {
                    purpose: Some("border-control".into()),
                    sensitive: Some(true),
                    ..RuleMatch::default()
                },
                Effect::Allow,
            ),
        ],
    };
    gov.install_treaty(treaty, 0);
    TwoCountry {
        bench,
        gov,
        citizen,
        gov_b,
        eco_a,
        eco_b,
        admin_c: org_c.digest().clone(),
    }
}

fn rule_ids(rules: &[ResolvedRule]) -> Vec<&str> {
    rules.iter().map(|r| r.rule.id.as_str()).collect()
}

fn force_party(fixture: &mut TwoCountry, party: &EcosystemId) {
    let registry = fixture.gov.registries["pact"].clone();
    let (updated, _) = publish_amendment(
        &registry,
        Amendment {
            party: party.clone(),
            change: AmendmentChange::Status {
                status: PartyStatus::InForce,
                effective: 1,
            },
        },
        &fixture.admin_c,
        &mut fixture.bench.logs,
        &fixture.bench.keyring,
    )
    .unwrap();
    fixture.gov.registries.insert("pact".into(), updated);
}

#[test]
fn same_ecosystem_interaction_sees_only_the_local_rule() {
    let fixture = two_country(40);
    // Citizen and their own government share country A; only a-protect
    // covers citizen-protection.
    let gov_a_member = fixture
        .bench
        .world
        .ecosystem(&fixture.eco_a)
        .unwrap()
        .population
        .iter()
        .find(|p| **p != fixture.citizen)
        .cloned()
        .unwrap();
    let rules = resolve_jurisdictions(
        &fixture.bench.world,
        &fixture.gov,
        &fixture.citizen,
        &gov_a_member,
        "citizen-protection",
    )
    .unwrap();
    assert_eq!(rule_ids(&rules), vec!["a-protect"]);
}

#[test]
fn cross_ecosystem_without_treaty_in_force_resolves_nothing_for_uncovered_purposes() {
    let fixture = two_country(41);
    // No treaty in force, and b-screen does not cover an insensitive
    // border-control interaction until evaluate; resolve still lists local
    // receiver-side rules whose purpose matches.
    let rules = resolve_jurisdictions(
        &fixture.bench.world,
        &fixture.gov,
        &fixture.citizen,
        &fixture.gov_b,
        "health-data",
    )
    .unwrap();
    assert!(rules.is_empty());
    let decision = evaluate(&rules, &ctx("health-data"));
    assert_eq!(decision.outcome, Outcome::Deny);
    assert_eq!(decision.trace[0].rule, "default-deny");
}

#[test]
fn treaty_rules_appear_only_when_both_sides_are_in_force() {
    let mut fixture = two_country(42);
    let resolve = |f: &TwoCountry| {
        resolve_jurisdictions(
            &f.bench.world,
            &f.gov,
            &f.citizen,
            &f.gov_b,
            "border-control",
        )
        .unwrap()
    };
    // Hand-enumerated oracle: before any amendment only country B's local
    // screening rule is applicable.
    assert_eq!(rule_ids(&resolve(&fixture)), vec!["b-screen"]);
    // One side in force is not enough.
    let eco_a = fixture.eco_a.clone();
    force_party(&mut fixture, &eco_a);
    assert_eq!(rule_ids(&resolve(&fixture)), vec!["b-screen"]);
    // Both sides in force contribute the treaty rules.
    let eco_b = fixture.eco_b.clone();
    force_party(&mut fixture, &eco_b);
    assert_eq!(
        rule_ids(&resolve(&fixture)),
        vec!["b-screen", "t-biometrics", "t-recognise"]
    );
}

#[test]
fn derogations_remove_exactly_the_derogated_rule_for_the_involved_party() {
    let mut fixture = two_country(43);
    let (eco_a, eco_b) = (fixture.eco_a.clone(), fixture.eco_b.clone());
    force_party(&mut fixture, &eco_a);
    force_party(&mut fixture, &eco_b);
    let registry = fixture.gov.registries["pact"].clone();
    let (updated, _) = publish_amendment(
        &registry,
        Amendment {
            party: fixture.eco_b.clone(),
            change: AmendmentChange::AddAnnotation(Annotation::Derogation(
                "t-biometrics".into(),
            )),
        },
        &fixture.admin_c,
        &mut fixture.bench.logs,
        &fixture.bench.keyring,
    )
    .unwrap();
    fixture.gov.registries.insert("pact".into(), updated);
    let rules = resolve_jurisdictions(
        &fixture.bench.world,
        &fixture.gov,
        &fixture.citizen,
        &fixture.gov_b,
        "border-control",
    )
    .unwrap();
    assert_eq!(rule_ids(&rules), vec!["b-screen", "t-recognise"]);
}

#[test]
fn amendments_version_anchor_and_replay() {
    let mut fixture = two_country(44);
    let v0 = fixture.gov.registries["pact"].clone();
    assert_eq!(v0.version, 0);

    let (eco_a, eco_b) = (fixture.eco_a.clone(), fixture.eco_b.clone());
    force_party(&mut fixture, &eco_a);
    force_party(&mut fixture, &eco_b);
    let live = fixture.gov.registries["pact"].clone();
    assert_eq!(live.version, 2);

    // Replay from zero reproduces the live registry.
    let replayed = SignatoryRegistry::replay(
        &fixture.gov.treaties["pact"],
        0,
        &live.amendment_log,
    );
    assert_eq!(replayed, live);

    // Every amendment digest is findable in the administering log.
    let log = fixture.bench.logs.get(&fixture.admin_c).unwrap();
    for (i, amendment) in live.amendment_log.iter().enumerate() {
        let digest = amendment_digest("pact", i as u64 + 1, amendment).unwrap();
        assert!(log.find_anchor(&digest).is_some(), "amendment {i} unanchored");
    }
}

#[test]
fn amendment_for_a_stranger_is_rejected() {
    let mut fixture = two_country(45);
    let registry = fixture.gov.registries["pact"].clone();
    let err = publish_amendment(
        &registry,
        Amendment {
            party: EcosystemId::new("atlantis"),
            change: AmendmentChange::Status {
                status: PartyStatus::InForce,
                effective: 1,
            },
        },
        &fixture.admin_c,
        &mut fixture.bench.logs,
        &fixture.bench.keyring,
    )
    .unwrap_err();
    assert!(matches!(err, GovError::UnknownParty(_)));
}

#[test]
fn evaluate_prefers_specificity_then_effect_priority() {
    let scope = EcosystemId::new("x");
    let broad_allow = ResolvedRule {
        rule: PolicyRule::new(
            "allow-any",
            scope.clone(),
            RuleMatch::for_purpose("p"),
            Effect::Allow,
        ),
        origin: RuleOrigin::Local(scope.clone()),
    };
    let narrow_deny = ResolvedRule {
        rule: PolicyRule::new(
            "deny-narrow",
            scope.clone(),
            RuleMatch {
                purpose: Some("p".into()),
                sender_kind: Some(PrincipalKind::Individual),
                level: Some(ConfidentialityLevel::Private),
                ..RuleMatch::default()
            },
            Effect::Deny,
        ),
        origin: RuleOrigin::Local(scope),
    };
    let decision = evaluate(&[broad_allow, narrow_deny], &ctx("p"));
    assert_eq!(decision.outcome, Outcome::Deny);
    assert_eq!(decision.trace.len(), 1);
    assert_eq!(decision.trace[0].rule, "deny-narrow");
}

/// Oracle: every combination of three equal-specificity effects, judged by
/// hand (any Deny wins; otherwise any RequireAssurance lifts the level;
/// otherwise Allow).
#[test]
fn evaluate_tie_breaking_matches_enumerated_oracle() {
    let effects = [
        Effect::Allow,
        Effect::Deny,
        Effect::RequireAssurance(AssuranceLevel::L1),
        Effect::RequireAssurance(AssuranceLevel::L2),
    ];
    let scope = EcosystemId::new("x");
    for (i, a) in effects.iter().enumerate() {
        for (j, b) in effects.iter().enumerate() {
            for (k, c) in effects.iter().enumerate() {
                let rules: Vec<ResolvedRule> = [(i, a), (j, b), (k, c)]
                    .into_iter()
                    .enumerate()
                    .map(|(n, (_, effect))| ResolvedRule {
                        rule: PolicyRule::new(
                            format!("r{n}"),
                            scope.clone(),
                            RuleMatch::for_purpose("p"),
                            effect.clone(),
                        ),
                        origin: RuleOrigin::Local(scope.clone()),
                    })
                    .collect();
                let decision = evaluate(&rules, &ctx("p"));

                let combo = [a, b, c];
                let expect_deny = combo.iter().any(|e| matches!(e, Effect::Deny));
                let expect_level = combo
                    .iter()
                    .filter_map(|e| match e {
                        Effect::RequireAssurance(l) => Some(*l),
                        _ => None,
                    })
                    .max()
                    .unwrap_or(AssuranceLevel::L0);
                if expect_deny {
                    assert_eq!(decision.outcome, Outcome::Deny, "{combo:?}");
                } else {
                    assert_eq!(decision.outcome, Outcome::Allow, "{combo:?}");
                    assert_eq!(decision.required_assurance, expect_level, "{combo:?}");
                }
                assert_eq!(decision.trace.len(), 3);
            }
        }
    }
}

#[test]
fn counterparty_verification_maps_levels_to_thresholds() {
    let mut bench = TestBench::new(46);
    let subject = bench.principal(PrincipalKind::Individual);
    let witness = bench.principal(PrincipalKind::Organisation);
    let mut witnesses = WitnessKeys::empty();
    witnesses.insert(
        witness.digest().clone(),
        bench
            .logs
            .get(witness.digest())
            .unwrap()
            .events[0]
            .signing_keys
            .clone(),
    );
    let subject_log = bench.logs.get(subject.digest()).unwrap().clone();
    let receipts: Vec<WitnessReceipt> = subject_log
        .events
        .iter()
        .map(|e| {
            WitnessReceipt::sign(
                witness.digest().clone(),
                e.event_digest().unwrap(),
                &bench.keyring.signing_pairs(witness.digest()).unwrap()[0],
            )
        })
        .collect();

    let check = |level, receipts: &[WitnessReceipt]| {
        verify_counterparty(
            &bench.world,
            &bench.logs,
            &subject,
            level,
            receipts,
            &witnesses,
        )
        .unwrap()
    };
    // L0 never verifies anything.
    assert_eq!(check(AssuranceLevel::L0, &[]), Verification::Met);
    // L1 wants a valid log, no receipts needed.
    assert_eq!(check(AssuranceLevel::L1, &[]), Verification::Met);
    // L2 wants one receipt per event.
    assert_eq!(check(AssuranceLevel::L2, &[]), Verification::NotMet);
    assert_eq!(check(AssuranceLevel::L2, &receipts), Verification::Met);
    // L3 wants two distinct witnesses; one is not enough.
    assert_eq!(check(AssuranceLevel::L3, &receipts), Verification::NotMet);
}

#[test]
fn screening_requires_reputation_and_allowance() {
    let mut fixture = two_country(47);
    let requester = fixture.citizen.clone();
    let eco_b = fixture.eco_b.clone();
    let mut registry = ActorRegistry::new(eco_b.clone());
    let rules = vec![ResolvedRule {
        rule: PolicyRule::new(
            "allow-search",
            eco_b.clone(),
            RuleMatch::for_purpose("research"),
            Effect::Allow,
        ),
        origin: RuleOrigin::Local(eco_b),
    }];
    let request = DataRequest {
        id: "req-1".into(),
        requester: requester.clone(),
        criteria: Vec::new(),
        purpose: "research".into(),
        state: RequestState::Queued,
    };
    let research_ctx = ctx("research");

    // Not reputable: rejected even though rules allow.
    let (screened, decision) = screen_request(
        &fixture.bench.world,
        &request,
        &registry,
        &rules,
        &research_ctx,
        &mut fixture.bench.logs,
        &fixture.bench.keyring,
    )
    .unwrap();
    assert_eq!(screened.state, RequestState::Rejected);
    assert_eq!(decision.outcome, Outcome::Allow);

    // Reputable: approved.
    registry = admit_actor(
        &fixture.bench.world,
        &registry,
        &requester,
        &mut fixture.bench.logs,
        &fixture.bench.keyring,
    )
    .unwrap();
    let (screened, _) = screen_request(
        &fixture.bench.world,
        &request,
        &registry,
        &rules,
        &research_ctx,
        &mut fixture.bench.logs,
        &fixture.bench.keyring,
    )
    .unwrap();
    assert_eq!(screened.state, RequestState::Approved);

    // Screening an already screened request fails.
    let err = screen_request(
        &fixture.bench.world,
        &screened,
        &registry,
        &rules,
        &research_ctx,
        &mut fixture.bench.logs,
        &fixture.bench.keyring,
    )
    .unwrap_err();
    assert!(matches!(err, GovError::AlreadyScreened));
}

#[test]
fn record_store_answers_criteria_searches() {
    use crate::semantics::{AttrType, CaptureBase, Record, SemanticBundle};
    let mut attrs = std::collections::BTreeMap::new();
    attrs.insert("species".to_string(), AttrType::Text);
    let bundle = SemanticBundle::new(
        CaptureBase::new(attrs, std::collections::BTreeSet::new()).unwrap(),
    )
    .unwrap();
    let mut store = RecordStore::default();
    let mut insert = |species: &str| {
        let mut values = std::collections::BTreeMap::new();
        values.insert("species".to_string(), serde_json::json!(species));
        let record = Record::new(bundle.bundle_said.clone(), values).unwrap();
        store.insert(record.clone());
        record.said
    };
    let cat = insert("cat");
    let _dog = insert("dog");
    let hits = store.search(&[Criterion {
        bundle_said: bundle.bundle_said.clone(),
        attribute: "species".into(),
        predicate: Predicate::Equals(serde_json::json!("cat")),
    }]);
    assert_eq!(hits, vec![cat]);
    let all = store.search(&[Criterion {
        bundle_said: bundle.bundle_said.clone(),
        attribute: "species".into(),
        predicate: Predicate::Exists,
    }]);
    assert_eq!(all.len(), 2);
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    fn arb_effect() -> impl Strategy<Value = Effect> {
        prop_oneof![
            Just(Effect::Allow),
            Just(Effect::Deny),
            Just(Effect::RequireAssurance(AssuranceLevel::L1)),
            Just(Effect::RequireAssurance(AssuranceLevel::L2)),
            Just(Effect::RequireAssurance(AssuranceLevel::L3)),
        ]
    }

    fn arb_kind() -> impl Strategy<Value = Option<PrincipalKind>> {
        prop_oneof![
            Just(None),
            Just(Some(PrincipalKind::Individual)),
            Just(Some(PrincipalKind::Organisation)),
            Just(Some(PrincipalKind::Political)),
        ]
    }

    fn arb_level() -> impl Strategy<Value = Option<ConfidentialityLevel>> {
        prop_oneof![
            Just(None),
            Just(Some(ConfidentialityLevel::Intimate)),
            Just(Some(ConfidentialityLevel::Private)),
            Just(Some(ConfidentialityLevel::Public)),
        ]
    }

    prop_compose! {
        fn arb_rule(n: usize)(
            sender_kind in arb_kind(),
            receiver_kind in arb_kind(),
            level in arb_level(),
            purpose in prop_oneof![Just(None), Just(Some("p".to_string())), Just(Some("q".to_string()))],
            sensitive in prop_oneof![Just(None), Just(Some(true)), Just(Some(false))],
            effect in arb_effect(),
            idx in 0..n.max(1)
        ) -> ResolvedRule {
            let matcher = RuleMatch { sender_kind, receiver_kind, level, purpose, sensitive };
            ResolvedRule {
                rule: PolicyRule::new(format!("r{idx}"), EcosystemId::new("e"), matcher, effect),
                origin: RuleOrigin::Local(EcosystemId::new("e")),
            }
        }
    }

    fn arb_ctx() -> impl Strategy<Value = RequestContext> {
        (
            prop_oneof![
                Just(PrincipalKind::Individual),
                Just(PrincipalKind::Organisation),
                Just(PrincipalKind::Political)
            ],
            prop_oneof![
                Just(PrincipalKind::Individual),
                Just(PrincipalKind::Organisation),
                Just(PrincipalKind::Political)
            ],
            prop_oneof![
                Just(ConfidentialityLevel::Intimate),
                Just(ConfidentialityLevel::Private),
                Just(ConfidentialityLevel::Public)
            ],
            prop_oneof![Just("p".to_string()), Just("q".to_string())],
            any::<bool>(),
        )
            .prop_map(|(sender_kind, receiver_kind, level, purpose, sensitive)| {
                RequestContext {
                    sender_kind,
                    receiver_kind,
                    level,
                    purpose,
                    sensitive,
                }
            })
    }

    proptest! {
        /// Byte-identical decisions for identical inputs, trace included.
        #[test]
        fn evaluation_is_deterministic(
            rules in proptest::collection::vec(arb_rule(6), 0..=6),
            ctx in arb_ctx()
        ) {
            let first = evaluate(&rules, &ctx);
            let second = evaluate(&rules, &ctx);
            prop_assert_eq!(
                first.to_canonical_json().unwrap(),
                second.to_canonical_json().unwrap()
            );
        }

        /// Removing all rules always denies.
        #[test]
        fn default_deny(ctx in arb_ctx()) {
            let decision = evaluate(&[], &ctx);
            prop_assert_eq!(decision.outcome, Outcome::Deny);
            prop_assert_eq!(decision.trace[0].rule.as_str(), "default-deny");
        }

        /// Adding a Deny rule never flips an existing Deny to Allow.
        #[test]
        fn monotone_denial(
            rules in proptest::collection::vec(arb_rule(6), 0..=6),
            extra in arb_rule(6),
            ctx in arb_ctx()
        ) {
            let mut deny_rule = extra;
            deny_rule.rule.effect = Effect::Deny;
            let before = evaluate(&rules, &ctx);
            if before.outcome == Outcome::Deny {
                let mut extended = rules.clone();
                extended.push(deny_rule);
                let after = evaluate(&extended, &ctx);
                prop_assert_eq!(after.outcome, Outcome::Deny);
            }
        }
    }
}
