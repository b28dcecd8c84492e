use super::*;
use crate::canonical::sha256_hex;
use crate::model::PrincipalKind;
use crate::testkit::TestBench;

fn payload(n: u8) -> Digest {
    sha256_hex(&[n])
}

fn two_principals(bench: &mut TestBench) -> (PrincipalId, PrincipalId) {
    (
        bench.principal(PrincipalKind::Individual),
        bench.principal(PrincipalKind::Individual),
    )
}

#[test]
fn open_connection_fixes_level_and_parties() {
    let mut bench = TestBench::new(20);
    let (a, b) = two_principals(&mut bench);
    let (world, conn) = bench
        .world
        .open_connection(&a, &b, ConfidentialityLevel::Private)
        .unwrap();
    assert_eq!(conn.level, ConfidentialityLevel::Private);
    assert_eq!(conn.status, ConnectionStatus::Open);
    assert!(conn.messages.is_empty());
    assert!(conn.involves(&a) && conn.involves(&b));

    // Re-opening the same (pair, level) returns the existing connection.
    let (world2, conn2) = world
        .open_connection(&b, &a, ConfidentialityLevel::Private)
        .unwrap();
    assert_eq!(conn2.id, conn.id);
    assert_eq!(world2.connections.len(), 1);
}

#[test]
fn self_connection_and_unknown_parties_are_rejected() {
    let mut bench = TestBench::new(21);
    let (a, _) = two_principals(&mut bench);
    assert!(matches!(
        bench
            .world
            .open_connection(&a, &a, ConfidentialityLevel::Intimate),
        Err(CommsError::SelfConnection)
    ));
    let (ghost, _) = bench.loose_inception();
    assert!(matches!(
        bench
            .world
            .open_connection(&a, &ghost.into(), ConfidentialityLevel::Public),
        Err(CommsError::UnknownPrincipal(_))
    ));
}

#[test]
fn messages_may_carry_any_level_inside_any_connection() {
    let mut bench = TestBench::new(22);
    let (a, b) = two_principals(&mut bench);
    let (world, conn) = bench
        .world
        .open_connection(&a, &b, ConfidentialityLevel::Private)
        .unwrap();
    // A public message on a private connection is fine.
    let (world, msg) = world
        .send_message(
            &conn.id,
            &a,
            ConfidentialityLevel::Public,
            payload(1),
            MessageMode::Active,
        )
        .unwrap();
    assert_eq!(msg.level, ConfidentialityLevel::Public);
    assert_eq!(msg.receiver, Some(b.clone()));
    assert_eq!(world.connections[&conn.id].messages, vec![msg.id.clone()]);
}

#[test]
fn all_nine_connection_message_level_pairs_are_constructible() {
    let mut bench = TestBench::new(23);
    let (a, b) = two_principals(&mut bench);
    let mut world = bench.world.clone();
    for conn_level in ConfidentialityLevel::ALL {
        let (w, conn) = world.open_connection(&a, &b, conn_level).unwrap();
        world = w;
        for msg_level in ConfidentialityLevel::ALL {
            let (w, msg) = world
                .send_message(&conn.id, &a, msg_level, payload(7), MessageMode::Active)
                .unwrap();
            world = w;
            assert_eq!(msg.level, msg_level);
            assert_eq!(world.connections[&conn.id].level, conn_level);
        }
    }
}

#[test]
fn strangers_cannot_send_and_terminated_connections_refuse_messages() {
    let mut bench = TestBench::new(24);
    let (a, b) = two_principals(&mut bench);
    let c = bench.principal(PrincipalKind::Organisation);
    let (world, conn) = bench
        .world
        .open_connection(&a, &b, ConfidentialityLevel::Private)
        .unwrap();
    assert!(matches!(
        world.send_message(
            &conn.id,
            &c,
            ConfidentialityLevel::Private,
            payload(2),
            MessageMode::Active
        ),
        Err(CommsError::NotAParty)
    ));
    let (world, _) = world.terminate_connection(&conn.id).unwrap();
    assert!(matches!(
        world.send_message(
            &conn.id,
            &a,
            ConfidentialityLevel::Private,
            payload(2),
            MessageMode::Active
        ),
        Err(CommsError::ConnectionTerminated)
    ));
}

#[test]
fn logical_time_is_strictly_increasing_per_sender_across_connections() {
    let mut bench = TestBench::new(25);
    let (a, b) = two_principals(&mut bench);
    let c = bench.principal(PrincipalKind::Individual);
    let (world, c1) = bench
        .world
        .open_connection(&a, &b, ConfidentialityLevel::Private)
        .unwrap();
    let (world, c2) = world
        .open_connection(&a, &c, ConfidentialityLevel::Public)
        .unwrap();
    let mut world = world;
    let mut last = 0;
    for (conn, n) in [(&c1, 1u8), (&c2, 2), (&c1, 3), (&c2, 4)] {
        let (w, msg) = world
            .send_message(
                &conn.id,
                &a,
                ConfidentialityLevel::Private,
                payload(n),
                MessageMode::Active,
            )
            .unwrap();
        world = w;
        assert!(msg.logical_time > last);
        last = msg.logical_time;
    }
}

#[test]
fn passive_emissions_reach_the_population_per_level() {
    let mut bench = TestBench::new(26);
    let (a, b) = two_principals(&mut bench);
    let c = bench.principal(PrincipalKind::Individual);
    // Ecosystem with everyone in it.
    let founders: std::collections::BTreeSet<_> =
        [a.clone(), b.clone(), c.clone()].into_iter().collect();
    let (world, eco, _) = bench
        .world
        .create_ecosystem(
            crate::model::EcosystemId::new("village"),
            &founders,
            crate::model::LegitimateAuthority::of([a.clone()]),
            crate::model::Administration::of([a.clone()], a.digest().clone()),
            &mut bench.logs,
            &bench.keyring,
        )
        .unwrap();

    // Public: every member except the sender.
    let (world, msg, audience) = world
        .emit_passive(&a, &eco.id, ConfidentialityLevel::Public, payload(1))
        .unwrap();
    assert_eq!(msg.mode, MessageMode::Passive);
    assert_eq!(msg.receiver, None);
    let expected: std::collections::BTreeSet<_> = [b.clone(), c.clone()].into_iter().collect();
    assert_eq!(audience, expected);

    // Intimate: only the sender's intimate sphere within the ecosystem.
    let (world, conn) = world
        .open_connection(&a, &b, ConfidentialityLevel::Intimate)
        .unwrap();
    let (world, _, audience) = world
        .emit_passive(&a, &eco.id, ConfidentialityLevel::Intimate, payload(2))
        .unwrap();
    // Oracle: enumerate the sender's intimate connections inside the
    // ecosystem by hand.
    let by_hand: std::collections::BTreeSet<_> = world
        .connections
        .values()
        .filter(|k| k.status == ConnectionStatus::Open)
        .filter(|k| k.level == ConfidentialityLevel::Intimate)
        .filter_map(|k| k.counterpart_of(&a).cloned())
        .filter(|p| founders.contains(p))
        .collect();
    assert_eq!(audience, by_hand);
    assert_eq!(audience, [b.clone()].into_iter().collect());
    let _ = conn;

    // Unknown context fails.
    assert!(matches!(
        world.emit_passive(
            &a,
            &crate::model::EcosystemId::new("nowhere"),
            ConfidentialityLevel::Public,
            payload(3)
        ),
        Err(CommsError::UnknownEcosystem(_))
    ));
}

#[test]
fn spheres_follow_connection_levels_and_ignore_terminated_links() {
    let mut bench = TestBench::new(27);
    let (a, b) = two_principals(&mut bench);
    let c = bench.principal(PrincipalKind::Individual);
    let (world, ab) = bench
        .world
        .open_connection(&a, &b, ConfidentialityLevel::Intimate)
        .unwrap();
    let (world, ac) = world
        .open_connection(&a, &c, ConfidentialityLevel::Public)
        .unwrap();

    let intimate = world
        .compute_sphere(&a, ConfidentialityLevel::Intimate)
        .unwrap();
    assert_eq!(intimate.counterparts, [b.clone()].into_iter().collect());
    assert_eq!(intimate.connections, [ab.id.clone()].into_iter().collect());
    let public = world
        .compute_sphere(&a, ConfidentialityLevel::Public)
        .unwrap();
    assert_eq!(public.counterparts, [c.clone()].into_iter().collect());
    assert_eq!(public.connections, [ac.id.clone()].into_iter().collect());
    let private = world
        .compute_sphere(&a, ConfidentialityLevel::Private)
        .unwrap();
    assert!(private.counterparts.is_empty() && private.connections.is_empty());

    // Termination removes the link from every sphere.
    let (world, _) = world.terminate_connection(&ab.id).unwrap();
    let intimate = world
        .compute_sphere(&a, ConfidentialityLevel::Intimate)
        .unwrap();
    assert!(intimate.counterparts.is_empty());
}

#[test]
fn relevel_attempts_always_fail() {
    let mut bench = TestBench::new(28);
    let (a, b) = two_principals(&mut bench);
    let (world, conn) = bench
        .world
        .open_connection(&a, &b, ConfidentialityLevel::Intimate)
        .unwrap();
    let (_, msg) = world
        .send_message(
            &conn.id,
            &a,
            ConfidentialityLevel::Intimate,
            payload(1),
            MessageMode::Active,
        )
        .unwrap();
    // Receiver downgrade, receiver upgrade, sender after the fact: all refused.
    for (actor, level) in [
        (&b, ConfidentialityLevel::Public),
        (&b, ConfidentialityLevel::Private),
        (&a, ConfidentialityLevel::Public),
    ] {
        assert!(matches!(
            attempt_relevel(&msg, actor, level),
            Err(CommsError::SenderOnlyAttribute)
        ));
    }
}

#[test]
fn message_wire_form_has_exactly_the_contracted_fields() {
    let mut bench = TestBench::new(29);
    let (a, b) = two_principals(&mut bench);
    let (world, conn) = bench
        .world
        .open_connection(&a, &b, ConfidentialityLevel::Private)
        .unwrap();
    let (_, msg) = world
        .send_message(
            &conn.id,
            &a,
            ConfidentialityLevel::Public,
            payload(1),
            MessageMode::Active,
        )
        .unwrap();
    let wire: serde_json::Value = serde_json::from_slice(&msg.to_wire().unwrap()).unwrap();
    let object = wire.as_object().unwrap();
    let keys: Vec<&str> = object.keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        vec![
            "connection",
            "id",
            "level",
            "logical_time",
            "mode",
            "payload_digest",
            "receiver",
            "sender"
        ]
    );
    assert_eq!(object["level"], serde_json::json!("public"));
    let back: Message = serde_json::from_value(wire).unwrap();
    assert_eq!(back, msg);
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    #[derive(Debug, Clone)]
    struct ConnSpec {
        a: usize,
        b: usize,
        level: usize,
        terminated: bool,
    }

    fn arb_world_plan() -> impl Strategy<Value = (usize, Vec<ConnSpec>)> {
        (2usize..=5).prop_flat_map(|n| {
            let conns = proptest::collection::vec(
                (0..n, 0..n, 0usize..3, any::<bool>()).prop_map(|(a, b, level, terminated)| {
                    ConnSpec {
                        a,
                        b,
                        level,
                        terminated,
                    }
                }),
                0..=8,
            );
            (Just(n), conns)
        })
    }

    proptest! {
        /// Sphere computation must agree with naive enumeration over the
        /// full connection set for every (owner, level) pair, and each
        /// connection id may appear in exactly one level's sphere.
        #[test]
        fn spheres_equal_bruteforce_enumeration((n, plan) in arb_world_plan(), seed in 0u64..1000) {
            let mut bench = TestBench::new(1000 + seed);
            let ids: Vec<_> = (0..n)
                .map(|_| bench.principal(PrincipalKind::Individual))
                .collect();
            let mut world = bench.world.clone();
            for spec in &plan {
                if spec.a == spec.b {
                    continue;
                }
                let level = ConfidentialityLevel::ALL[spec.level];
                let (w, conn) = world
                    .open_connection(&ids[spec.a], &ids[spec.b], level)
                    .unwrap();
                world = w;
                if spec.terminated {
                    let (w, _) = world.terminate_connection(&conn.id).unwrap();
                    world = w;
                }
            }
            for owner in &ids {
                let mut seen: std::collections::BTreeMap<ConnectionId, usize> = Default::default();
                for level in ConfidentialityLevel::ALL {
                    let sphere = world.compute_sphere(owner, level).unwrap();
                    // Brute force: walk every connection in the world.
                    let mut counterparts = std::collections::BTreeSet::new();
                    let mut connections = std::collections::BTreeSet::new();
                    for conn in world.connections.values() {
                        if conn.status == ConnectionStatus::Open
                            && conn.level == level
                            && conn.involves(owner)
                        {
                            let other = conn
                                .parties
                                .iter()
                                .find(|p| *p != owner)
                                .expect("distinct parties");
                            counterparts.insert(other.clone());
                            connections.insert(conn.id.clone());
                        }
                    }
                    prop_assert_eq!(&sphere.counterparts, &counterparts);
                    prop_assert_eq!(&sphere.connections, &connections);
                    for c in sphere.connections {
                        *seen.entry(c).or_insert(0) += 1;
                    }
                }
                // Disjointness across levels for this owner.
                prop_assert!(seen.values().all(|count| *count == 1));
            }
        }

        /// Every active message resolves a receiver; passive ones have none.
        #[test]
        fn active_messages_always_have_receivers(seed in 0u64..500, passive in any::<bool>()) {
            let mut bench = TestBench::new(2000 + seed);
            let a = bench.principal(PrincipalKind::Individual);
            let b = bench.principal(PrincipalKind::Individual);
            let (world, conn) = bench
                .world
                .open_connection(&a, &b, ConfidentialityLevel::Private)
                .unwrap();
            let mode = if passive { MessageMode::Passive } else { MessageMode::Active };
            let (world, msg) = world
                .send_message(&conn.id, &a, ConfidentialityLevel::Private, payload(9), mode)
                .unwrap();
            match msg.mode {
                MessageMode::Active => {
                    prop_assert!(msg.receiver.is_some());
                    prop_assert!(world.principals.contains_key(msg.receiver.as_ref().unwrap()));
                }
                MessageMode::Passive => prop_assert!(msg.receiver.is_none()),
            }
        }
    }
}
