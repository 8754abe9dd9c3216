mod common;

use common::*;
use slicenet::api::{ApiError, Command, Scenario, SliceRef};
use slicenet::conference::Role;
use slicenet::emulator::{run_scenario, to_ndjson, Emulator, EmulatorConfig};
use slicenet::fixtures;
use slicenet::time::SimTime;

fn demo() -> Emulator {
    Emulator::new(fixtures::demo_topology(), EmulatorConfig::default())
}

#[test]
fn publish_reaches_consumer() {
    let mut em = demo();
    em.submit(Command::CreateSlice(fixtures::demo_template("blue", 1, 1))).unwrap();
    em.submit(join("blue", "alice", "poa2", &[Role::Producer])).unwrap();
    em.submit(join("blue", "bob", "poa1", &[Role::Consumer])).unwrap();
    em.run_for_ms(100.0);
    for _ in 0..3 {
        em.submit(publish("blue", "alice")).unwrap();
    }
    em.run_for_ms(1000.0);
    assert_eq!(em.participant("blue", "bob").unwrap().stats.delivered, 3);
    assert_eq!(em.participant("blue", "alice").unwrap().stats.served, 3);
    let m = &em.metrics().slices[0];
    assert_eq!((m.published, m.delivered, m.retries, m.abandoned), (3, 3, 0, 0));
}

#[test]
fn producer_does_not_fetch_itself() {
    let mut em = demo();
    em.submit(Command::CreateSlice(fixtures::demo_template("blue", 1, 1))).unwrap();
    em.submit(join("blue", "alice", "poa1", &[Role::Producer, Role::Consumer])).unwrap();
    em.submit(join("blue", "bob", "poa2", &[Role::Producer, Role::Consumer])).unwrap();
    em.run_for_ms(50.0);
    em.submit(publish("blue", "alice")).unwrap();
    em.submit(publish("blue", "bob")).unwrap();
    em.run_for_ms(1000.0);
    assert_eq!(em.participant("blue", "alice").unwrap().stats.delivered, 1);
    assert_eq!(em.participant("blue", "bob").unwrap().stats.delivered, 1);
}

#[test]
fn join_errors() {
    let mut em = demo();
    em.submit(Command::CreateSlice(fixtures::demo_template("blue", 1, 1))).unwrap();
    em.submit(join("blue", "alice", "poa1", &[Role::Producer])).unwrap();
    let dup = em.submit(join("blue", "alice", "poa2", &[Role::Producer]));
    assert!(matches!(dup, Err(ApiError::DuplicateParticipant(_))), "{dup:?}");
    let poa = em.submit(join("blue", "bob", "edge1", &[Role::Consumer]));
    assert!(matches!(poa, Err(ApiError::InvalidPoa(_))), "{poa:?}");
    let slice = em.submit(join("green", "bob", "poa1", &[Role::Consumer]));
    assert!(matches!(slice, Err(ApiError::UnknownSlice(_))), "{slice:?}");
    let errors = em.log().iter().filter(|r| r.kind == "command_error").count();
    assert_eq!(errors, 3);
}

#[test]
fn consumer_move_of_a_producer_is_refused() {
    let mut em = demo();
    em.submit(Command::CreateSlice(fixtures::demo_template("blue", 1, 1))).unwrap();
    em.submit(join("blue", "alice", "poa1", &[Role::Producer])).unwrap();
    let r = em.submit(consumer_move("blue", "alice", "poa2"));
    assert!(matches!(r, Err(ApiError::ProducerMustHandoff(_))), "{r:?}");
}

#[test]
fn same_participant_name_in_two_slices() {
    let mut em = demo();
    em.submit(Command::CreateSlice(fixtures::demo_template("blue", 1, 1))).unwrap();
    em.submit(Command::CreateSlice(fixtures::demo_template("red", 1, 1))).unwrap();
    for s in ["blue", "red"] {
        em.submit(join(s, "alice", "poa1", &[Role::Producer])).unwrap();
        em.submit(join(s, "bob", "poa2", &[Role::Consumer])).unwrap();
    }
    em.run_for_ms(50.0);
    em.submit(publish("blue", "alice")).unwrap();
    em.run_for_ms(1000.0);
    assert_eq!(em.participant("blue", "bob").unwrap().stats.delivered, 1);
    assert_eq!(em.participant("red", "bob").unwrap().stats.delivered, 0);
    assert_eq!(em.slices_of("alice"), vec!["blue".to_string(), "red".to_string()]);
}

#[test]
fn delete_slice_restores_ledger_and_forwarders() {
    let mut em = demo();
    let before = em.ledger().snapshot();
    em.submit(Command::CreateSlice(fixtures::demo_template("blue", 2, 2))).unwrap();
    em.submit(join("blue", "alice", "poa1", &[Role::Producer])).unwrap();
    em.submit(join("blue", "bob", "poa2", &[Role::Consumer])).unwrap();
    em.submit(stream("blue", "alice", 10, 50)).unwrap();
    em.run_for_ms(200.0);
    assert_ne!(em.ledger().snapshot(), before);
    em.submit(Command::DeleteSlice(SliceRef { slice: "blue".into() })).unwrap();
    assert_eq!(em.ledger().snapshot(), before);
    assert!(em.forwarder_views().iter().all(|f| f.slices.iter().all(|s| s.slice == "control")));
    // in-flight packets of the deleted slice are dropped, not delivered
    em.run_for_ms(2000.0);
    assert!(em.slice_views().is_empty());
}

#[test]
fn views_report_conservation_and_participants() {
    let mut em = demo();
    em.submit(Command::CreateSlice(fixtures::demo_template("blue", 1, 2))).unwrap();
    em.submit(join("blue", "alice", "poa1", &[Role::Producer])).unwrap();
    em.submit(join("blue", "bob", "poa2", &[Role::Consumer])).unwrap();
    em.submit(join("blue", "carol", "poa2", &[Role::Consumer])).unwrap();
    em.submit(stream("blue", "alice", 20, 40)).unwrap();
    em.run_for_ms(3000.0);
    let v = em.views();
    assert_eq!(v.slices.len(), 1);
    let s = &v.slices[0];
    assert_eq!(s.participants.len(), 3);
    assert!(s.participants.iter().all(|p| p.attached));
    assert_eq!(s.participants.iter().map(|p| p.delivered).sum::<u64>(), 40);
    for f in &v.forwarders {
        assert!(f.slices.iter().any(|s| s.slice == "control"));
        for s in &f.slices {
            assert!(s.conserved, "{} {}", f.node_id, s.slice);
            assert!(s.cs_bytes <= s.cs_budget_bytes);
        }
    }
    let json = serde_json::to_value(&v).unwrap();
    assert_eq!(json["schema_version"], 1);
}

#[test]
fn demo_scenario_runs_clean() {
    let sc = Scenario::parse(fixtures::DEMO_SCENARIO).unwrap();
    let out = run_scenario(fixtures::demo_topology(), &sc, EmulatorConfig::default());
    assert!(!out.log.iter().any(|r| r.kind == "command_error" || r.kind == "slice_rejected"));
    let blue = out.metrics.slices.iter().find(|s| s.name == "blue").unwrap();
    let red = out.metrics.slices.iter().find(|s| s.name == "red").unwrap();
    assert_eq!((blue.published, blue.delivered, blue.abandoned), (61, 122, 0));
    assert_eq!((red.published, red.delivered, red.abandoned), (40, 80, 0));
    assert_eq!(blue.handoffs.len(), 1);
    assert_eq!(blue.handoffs[0].interests_lost, 0);
}

#[test]
fn demo_scenario_is_deterministic() {
    let sc = Scenario::parse(fixtures::DEMO_SCENARIO).unwrap();
    let a = run_scenario(fixtures::demo_topology(), &sc, EmulatorConfig::with_seed(42));
    let b = run_scenario(fixtures::demo_topology(), &sc, EmulatorConfig::with_seed(42));
    assert_eq!(to_ndjson(&a.log), to_ndjson(&b.log));
}

#[test]
fn slices_are_isolated_in_the_demo() {
    let sc = Scenario::parse(fixtures::DEMO_SCENARIO).unwrap();
    // blue is created first, so its id and embedding cannot depend on red
    let (full, alone) = isolation_traces(&sc, "blue");
    assert!(full.lines().count() > 1000);
    assert!(full == alone, "blue trace differs");
}

#[test]
fn scripted_errors_are_logged_and_the_run_continues() {
    let sc = Scenario::parse(
        r#"{"commands": [
            {"at_ms": 0, "command": "join", "args": {"slice": "nope", "participant": "a", "poa": "poa1"}},
            {"at_ms": 5, "command": "create_slice", "args": {"slice_name": "blue", "sites": [{"site_id": "a", "poa_node_id": "poa1", "expected_participants": 1}, {"site_id": "b", "poa_node_id": "poa2", "expected_participants": 1}], "per_stream_kbps": 100, "latency_bound_ms": 1, "mobility_enabled": false, "cache_window_s": 1}},
            {"at_ms": 10, "command": "create_slice", "args": {"slice_name": "blue", "sites": [{"site_id": "a", "poa_node_id": "poa1", "expected_participants": 1}, {"site_id": "b", "poa_node_id": "poa2", "expected_participants": 1}], "per_stream_kbps": 100, "latency_bound_ms": 50, "mobility_enabled": false, "cache_window_s": 1}}
        ], "end_ms": 100}"#,
    )
    .unwrap();
    let mut em = demo();
    let tickets = em.load_script(&sc);
    em.run_until(SimTime::from_ms(100.0));
    let results: Vec<_> = tickets.iter().map(|t| em.take_result(*t).unwrap()).collect();
    assert!(matches!(results[0], Err(ApiError::UnknownSlice(_))));
    assert!(matches!(results[1], Err(ApiError::Embedding(_))));
    assert!(results[2].is_ok());
    let kinds: Vec<_> = em.log().iter().map(|r| r.kind.as_str()).filter(|k| *k != "monitor").collect();
    assert_eq!(kinds[..3], ["command_error", "slice_rejected", "command_error"]);
}
