//! Bundled topologies, templates and the demo scenario.

use crate::orchestrator::{SiteSpec, SliceTemplate};
use crate::substrate::Topology;

/// 6 nodes: two PoAs, two edges, a core and a data center in domains A, B, C.
pub const DEMO_TOPOLOGY: &str = include_str!("../fixtures/demo_topology.json");
/// Ingress -- PoA1 -- R -- PoA2 plus a direct Ingress -- R shortcut.
pub const HANDOFF_LINE_TOPOLOGY: &str = include_str!("../fixtures/handoff_line_topology.json");
/// Two-site templates spanning feasible and infeasible loads on the demo topology.
pub const FIXTURE_TEMPLATES: &str = include_str!("../fixtures/fixture_templates.json");
/// Two slices, three participants each, one producer handoff.
pub const DEMO_SCENARIO: &str = include_str!("../fixtures/demo_scenario.json");

pub fn demo_topology() -> Topology {
    Topology::load(DEMO_TOPOLOGY).expect("bundled topology is valid")
}

pub fn line_topology() -> Topology {
    Topology::load(HANDOFF_LINE_TOPOLOGY).expect("bundled topology is valid")
}

pub fn fixture_templates() -> Vec<SliceTemplate> {
    serde_json::from_str(FIXTURE_TEMPLATES).expect("bundled templates are valid")
}

fn site(id: &str, poa: &str, n: u32) -> SiteSpec {
    SiteSpec {
        site_id: id.into(),
        poa_node_id: poa.into(),
        expected_participants: n,
    }
}

/// Sites `a` at poa1 and `b` at poa2 on the demo topology, 1000 kbps, 20 ms.
pub fn demo_template(name: &str, at_poa1: u32, at_poa2: u32) -> SliceTemplate {
    SliceTemplate {
        slice_name: name.into(),
        sites: vec![site("a", "poa1", at_poa1), site("b", "poa2", at_poa2)],
        per_stream_kbps: 1000,
        latency_bound_ms: 20.0,
        mobility_enabled: false,
        cache_window_s: 10.0,
        availability: None,
        security: None,
    }
}

/// One participant at each PoA of the line topology, mobility on.
pub fn line_template(name: &str) -> SliceTemplate {
    SliceTemplate {
        slice_name: name.into(),
        sites: vec![site("in", "ingress", 1), site("p1", "poa1", 1), site("p2", "poa2", 1)],
        per_stream_kbps: 1000,
        latency_bound_ms: 50.0,
        mobility_enabled: true,
        cache_window_s: 10.0,
        availability: None,
        security: None,
    }
}
