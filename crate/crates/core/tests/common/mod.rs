#![allow(dead_code)]

use std::collections::BTreeMap;

use slicenet::api::{Command, HandoffArgs, JoinArgs, MobilityArgs, MoveArgs, PublishArgs, Scenario, StreamArgs};
use slicenet::conference::Role;
use slicenet::emulator::{run_scenario, slice_trace, to_ndjson, Emulator, EmulatorConfig};
use slicenet::fixtures;
use slicenet::mobility::HandoffReport;
use slicenet::substrate::AccessType;

pub fn join(slice: &str, p: &str, poa: &str, roles: &[Role]) -> Command {
    Command::Join(JoinArgs {
        slice: slice.into(),
        participant: p.into(),
        poa: poa.into(),
        iface: None,
        roles: Some(roles.to_vec()),
    })
}

pub fn publish(slice: &str, p: &str) -> Command {
    Command::Publish(PublishArgs { slice: slice.into(), participant: p.into(), payload_bytes: None })
}

pub fn stream(slice: &str, p: &str, count: u64, interval_ms: u64) -> Command {
    Command::Stream(StreamArgs { slice: slice.into(), participant: p.into(), count, interval_ms, payload_bytes: None })
}

pub fn handoff(slice: &str, p: &str, to: &str, gap_ms: u64) -> Command {
    Command::Handoff(HandoffArgs {
        slice: slice.into(),
        participant: p.into(),
        to_poa: to.into(),
        iface: None,
        gap_ms: Some(gap_ms),
    })
}

pub fn consumer_move(slice: &str, p: &str, to: &str) -> Command {
    Command::Move(MoveArgs { slice: slice.into(), participant: p.into(), to_poa: to.into(), iface: None })
}

pub fn mobility(slice: &str, enabled: bool) -> Command {
    Command::ToggleMobility(MobilityArgs { slice: slice.into(), enabled })
}

/// Line fixture with producer `p` at poa1 and consumer `c` at ingress.
pub fn line_emulator(config: EmulatorConfig) -> Emulator {
    let mut em = Emulator::new(fixtures::line_topology(), config);
    em.submit(Command::CreateSlice(fixtures::line_template("line"))).unwrap();
    em.submit(join("line", "p", "poa1", &[Role::Producer])).unwrap();
    em.submit(join("line", "c", "ingress", &[Role::Consumer])).unwrap();
    em.run_for_ms(50.0);
    em
}

/// Streams from `p` while it hands off `n` times between poa1 and poa2.
pub fn line_handoffs(mobility_on: bool, n: usize, gap_ms: u64) -> (Emulator, Vec<HandoffReport>) {
    let mut em = line_emulator(EmulatorConfig::default());
    if !mobility_on {
        em.submit(mobility("line", false)).unwrap();
    }
    let spacing = (gap_ms as f64 + 350.0).max(400.0);
    let count = ((n as f64 + 2.0) * spacing / 20.0) as u64;
    em.submit(stream("line", "p", count, 20)).unwrap();
    em.run_for_ms(500.0);
    for k in 0..n {
        let to = if k % 2 == 0 { "poa2" } else { "poa1" };
        let r = em.submit(handoff("line", "p", to, gap_ms));
        assert_eq!(r.is_ok(), mobility_on, "{r:?}");
        em.run_for_ms(spacing);
    }
    em.run_for_ms(12_000.0);
    em.finalize_reports();
    let reports = em.handoff_reports("line");
    (em, reports)
}

/// Producer serves caused by a consumer_move while five segments are still on the
/// consumer's LTE access link, and how many fetches the move re-expressed.
pub fn move_serve_delta(cache_enabled: bool) -> (u64, u64) {
    let config = EmulatorConfig { cache_enabled, ..EmulatorConfig::default() };
    let mut em = Emulator::new(fixtures::demo_topology(), config);
    em.submit(Command::CreateSlice(fixtures::demo_template("blue", 1, 1))).unwrap();
    em.submit(join("blue", "prod", "poa2", &[Role::Producer])).unwrap();
    em.submit(Command::Join(JoinArgs {
        slice: "blue".into(),
        participant: "cons".into(),
        poa: "poa1".into(),
        iface: Some(AccessType::Lte),
        roles: Some(vec![Role::Consumer]),
    }))
    .unwrap();
    em.run_for_ms(100.0);
    for _ in 0..5 {
        em.submit(publish("blue", "prod")).unwrap();
    }
    // Data leaves poa1 at ~285 ms and spends 50 ms on the LTE link.
    em.run_for_ms(200.0);
    assert!(em.log().iter().any(|r| r.kind == "data" && r.str_field("node") == Some("poa1")));
    assert_eq!(em.participant("blue", "cons").unwrap().stats.delivered, 0);
    let before = em.participant("blue", "prod").unwrap().stats.served;
    let ack = em.submit(consumer_move("blue", "cons", "poa2")).unwrap();
    em.run_for_ms(10_000.0);
    assert_eq!(em.participant("blue", "cons").unwrap().stats.delivered, 5);
    let after = em.participant("blue", "prod").unwrap().stats.served;
    (after - before, ack["reexpressed"].as_u64().unwrap())
}

/// Per-segment Interests sent poa1→edge1 and deliveries, for 3 consumers at poa1
/// and a producer at poa2 streaming `segments` segments.
pub fn multicast_counts(segments: u64) -> (BTreeMap<String, u32>, BTreeMap<String, u32>) {
    let mut em = Emulator::new(fixtures::demo_topology(), EmulatorConfig::default());
    em.submit(Command::CreateSlice(fixtures::demo_template("blue", 3, 1))).unwrap();
    em.submit(join("blue", "prod", "poa2", &[Role::Producer])).unwrap();
    for c in ["c1", "c2", "c3"] {
        em.submit(join("blue", c, "poa1", &[Role::Consumer])).unwrap();
    }
    em.run_for_ms(100.0);
    em.submit(stream("blue", "prod", segments, 30)).unwrap();
    em.run_for_ms(segments as f64 * 30.0 + 5_000.0);
    let mut upstream = BTreeMap::new();
    let mut delivered = BTreeMap::new();
    for r in em.log() {
        let Some(n) = r.str_field("name").filter(|n| n.contains("/media/")) else { continue };
        if r.kind == "interest" && r.str_field("node") == Some("poa1") && r.str_field("next") == Some("edge1") {
            *upstream.entry(n.to_string()).or_default() += 1;
        }
        if r.kind == "deliver" {
            *delivered.entry(n.to_string()).or_default() += 1;
        }
    }
    (upstream, delivered)
}

/// `slice`'s trace from the full scenario and from the scenario restricted to `slice`.
pub fn isolation_traces(scenario: &Scenario, slice: &str) -> (String, String) {
    let mut solo = scenario.clone();
    solo.commands.retain(|c| c.command.slice() == slice);
    let full = run_scenario(fixtures::demo_topology(), scenario, EmulatorConfig::default());
    let alone = run_scenario(fixtures::demo_topology(), &solo, EmulatorConfig::default());
    (to_ndjson(&slice_trace(&full.log, slice)), to_ndjson(&slice_trace(&alone.log, slice)))
}
