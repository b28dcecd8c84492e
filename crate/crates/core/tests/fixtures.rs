//! The shipped scenario fixtures and the frozen golden transcript must
//! always match what the simulator regenerates.
//!
//! To refresh after an intentional scenario change:
//! `cargo test -p distgov-core --test fixtures -- --ignored regenerate`

use std::fs;
use std::path::PathBuf;

use distgov_core::sim::{run_scenario_with_state, Scenario};

const GOLDEN_SEED: u64 = 42;

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn regenerate() -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for scenario in Scenario::ALL {
        let (transcript, sim) =
            run_scenario_with_state(scenario.name(), GOLDEN_SEED).expect("scenario runs");
        assert!(
            transcript.all_assertions_passed(),
            "{} assertions failed",
            scenario.name()
        );
        files.extend(sim.fixtures(scenario.name()).expect("fixtures"));
        files.push((
            format!("{}.seed{GOLDEN_SEED}.transcript.jsonl", scenario.name()),
            transcript.to_jsonl().expect("transcript bytes"),
        ));
    }
    files
}

#[test]
fn shipped_fixtures_match_regeneration() {
    let dir = fixtures_dir();
    for (name, bytes) in regenerate() {
        let path = dir.join(&name);
        let shipped = fs::read(&path)
            .unwrap_or_else(|e| panic!("missing fixture {}: {e}", path.display()));
        assert_eq!(shipped, bytes, "fixture {name} is stale");
    }
}

#[test]
#[ignore = "writes the fixture files; run explicitly to refresh"]
fn regenerate_fixtures() {
    let dir = fixtures_dir();
    fs::create_dir_all(&dir).expect("create fixtures dir");
    for (name, bytes) in regenerate() {
        fs::write(dir.join(&name), bytes).expect("write fixture");
    }
}
