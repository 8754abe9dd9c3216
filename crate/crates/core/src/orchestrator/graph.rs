//! Virtual service graph and the conference load model.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use super::template::{SliceTemplate, TemplateError};

/// Throughput one compute unit sustains.
pub const MBPS_PER_COMPUTE_UNIT: u64 = 100;
/// Sync signalling rate reserved per participant on site-to-sync vlinks.
pub const SYNC_KBPS_PER_PARTICIPANT: u64 = 64;
pub const SYNC_COMPUTE_UNITS: u64 = 1;
pub const SYNC_VNODE: &str = "sync";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VNodeKind {
    Forwarder,
    ServiceFunction,
    Storage,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VNode {
    pub vnode_id: String,
    pub kind: VNodeKind,
    pub compute_units: u64,
    pub cache_mb: f64,
    /// Egress throughput the load model assigns, in Mbps.
    pub throughput_mbps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pin_hint: Option<String>,
}

impl VNode {
    /// Storage reserved on the host, in whole MB.
    pub fn storage_mb(&self) -> u64 {
        self.cache_mb.ceil() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VLink {
    pub id: String,
    pub a: String,
    pub b: String,
    pub bandwidth_kbps: u64,
    pub latency_budget_ms: f64,
}

impl VLink {
    pub fn new(a: &str, b: &str, bandwidth_kbps: u64, latency_budget_ms: f64) -> VLink {
        VLink {
            id: format!("{a}--{b}"),
            a: a.to_string(),
            b: b.to_string(),
            bandwidth_kbps,
            latency_budget_ms,
        }
    }

    pub fn bandwidth_mbps(&self) -> f64 {
        self.bandwidth_kbps as f64 / 1000.0
    }

    pub fn latency_budget_us(&self) -> u64 {
        (self.latency_budget_ms * 1000.0).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ServiceGraph {
    pub vnodes: Vec<VNode>,
    pub vlinks: Vec<VLink>,
}

pub fn site_vnode_id(site_id: &str) -> String {
    format!("fwd-{site_id}")
}

impl ServiceGraph {
    pub fn vnode(&self, id: &str) -> Option<&VNode> {
        self.vnodes.iter().find(|v| v.vnode_id == id)
    }

    pub fn vlink(&self, id: &str) -> Option<&VLink> {
        self.vlinks.iter().find(|l| l.id == id)
    }

    /// Vnodes adjacent to `id`, in vlink order.
    pub fn neighbors(&self, id: &str) -> Vec<&str> {
        self.vlinks
            .iter()
            .filter_map(|l| {
                if l.a == id {
                    Some(l.b.as_str())
                } else if l.b == id {
                    Some(l.a.as_str())
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        let Some(first) = self.vnodes.first() else {
            return true;
        };
        let mut seen = BTreeSet::from([first.vnode_id.as_str()]);
        let mut queue = VecDeque::from([first.vnode_id.as_str()]);
        while let Some(v) = queue.pop_front() {
            for n in self.neighbors(v) {
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen.len() == self.vnodes.len()
    }
}

/// Applies the load model to a validated template.
///
/// With P total participants and p_s at site s:
/// egress T_s = p_s (P - 1) rate, ingress = p_s (P - p_s) rate,
/// compute = ceil(max(T_s, ingress) / 100 Mbps), cache = window * P * rate / 8000 MB,
/// site-site bandwidth = p_s p_u rate.
pub fn build_service_graph(t: &SliceTemplate) -> Result<ServiceGraph, TemplateError> {
    t.validate()?;
    let rate = t.per_stream_kbps;
    let total = t.total_participants();
    let cache_mb = t.cache_window_s * total as f64 * rate as f64 / 8000.0;
    let mut g = ServiceGraph::default();
    for s in &t.sites {
        let p = s.expected_participants as u64;
        let egress_kbps = p * (total - 1) * rate;
        let ingress_kbps = p * (total - p) * rate;
        let peak_kbps = egress_kbps.max(ingress_kbps);
        let compute = peak_kbps.div_ceil(MBPS_PER_COMPUTE_UNIT * 1000).max(1);
        g.vnodes.push(VNode {
            vnode_id: site_vnode_id(&s.site_id),
            kind: VNodeKind::Forwarder,
            compute_units: compute,
            cache_mb,
            throughput_mbps: egress_kbps as f64 / 1000.0,
            pin_hint: Some(s.poa_node_id.clone()),
        });
    }
    g.vnodes.push(VNode {
        vnode_id: SYNC_VNODE.to_string(),
        kind: VNodeKind::ServiceFunction,
        compute_units: SYNC_COMPUTE_UNITS,
        cache_mb: 0.0,
        throughput_mbps: 0.0,
        pin_hint: None,
    });
    for (i, s) in t.sites.iter().enumerate() {
        for u in &t.sites[i + 1..] {
            let bw = s.expected_participants as u64 * u.expected_participants as u64 * rate;
            g.vlinks.push(VLink::new(
                &site_vnode_id(&s.site_id),
                &site_vnode_id(&u.site_id),
                bw,
                t.latency_bound_ms,
            ));
        }
    }
    for s in &t.sites {
        g.vlinks.push(VLink::new(
            &site_vnode_id(&s.site_id),
            SYNC_VNODE,
            s.expected_participants as u64 * SYNC_KBPS_PER_PARTICIPANT,
            t.latency_bound_ms,
        ));
    }
    debug_assert!(g.is_connected());
    Ok(g)
}

/// Per-vnode and per-vlink amounts, for comparing two load models.
pub fn demand(g: &ServiceGraph) -> (BTreeMap<String, (u64, u64)>, BTreeMap<String, u64>) {
    let nodes = g
        .vnodes
        .iter()
        .map(|v| (v.vnode_id.clone(), (v.compute_units, v.storage_mb())))
        .collect();
    let links = g.vlinks.iter().map(|l| (l.id.clone(), l.bandwidth_kbps)).collect();
    (nodes, links)
}
