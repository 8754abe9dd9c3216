//! Versioned JSON snapshots for the management plane, taken between events.

use serde::Serialize;

use super::{routing, Emulator};
use crate::conference::Role;
use crate::icn::{SliceCounters, SliceId};
use crate::mobility::HandoffReport;
use crate::substrate::LedgerSnapshot;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VNodeView {
    pub vnode_id: String,
    pub kind: String,
    pub node: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VLinkView {
    pub vlink_id: String,
    pub a: String,
    pub b: String,
    pub bandwidth_kbps: u64,
    pub path: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantView {
    pub participant_id: String,
    pub roles: Vec<Role>,
    pub poa: String,
    pub iface: String,
    pub attached: bool,
    pub published: u64,
    pub delivered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceView {
    pub slice_id: u32,
    pub name: String,
    pub mobility_enabled: bool,
    pub vnodes: Vec<VNodeView>,
    pub vlinks: Vec<VLinkView>,
    pub participants: Vec<ParticipantView>,
    pub roster_version: u64,
    pub footprint: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FibRow {
    pub prefix: String,
    pub nexthops: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwarderSliceView {
    pub slice_id: u32,
    pub slice: String,
    pub pit_size: usize,
    pub cs_entries: usize,
    pub cs_bytes: u64,
    pub cs_budget_bytes: u64,
    pub fib: Vec<FibRow>,
    pub counters: SliceCounters,
    pub conserved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwarderStateView {
    pub node_id: String,
    pub slices: Vec<ForwarderSliceView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceMetrics {
    pub slice_id: u32,
    pub name: String,
    pub published: u64,
    pub delivered: u64,
    pub served: u64,
    pub retries: u64,
    pub abandoned: u64,
    pub mean_latency_ms: Option<f64>,
    pub cs_hits: u64,
    pub handoffs: Vec<HandoffReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub schema_version: u32,
    pub t_ms: f64,
    pub slices: Vec<SliceMetrics>,
    pub ledger: LedgerSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Views {
    pub schema_version: u32,
    pub t_ms: f64,
    pub slices: Vec<SliceView>,
    pub forwarders: Vec<ForwarderStateView>,
    pub metrics: Metrics,
}

impl Emulator {
    pub fn slice_views(&self) -> Vec<SliceView> {
        self.slices
            .values()
            .map(|rt| SliceView {
                slice_id: rt.id.0,
                name: rt.name.clone(),
                mobility_enabled: rt.mobility,
                vnodes: rt
                    .graph
                    .vnodes
                    .iter()
                    .map(|v| VNodeView {
                        vnode_id: v.vnode_id.clone(),
                        kind: serde_json::to_value(v.kind).ok().and_then(|k| k.as_str().map(String::from)).unwrap_or_default(),
                        node: rt.alloc.node_map.get(&v.vnode_id).cloned().unwrap_or_default(),
                    })
                    .collect(),
                vlinks: rt
                    .graph
                    .vlinks
                    .iter()
                    .map(|l| VLinkView {
                        vlink_id: l.id.clone(),
                        a: l.a.clone(),
                        b: l.b.clone(),
                        bandwidth_kbps: l.bandwidth_kbps,
                        path: rt.alloc.link_map.get(&l.id).cloned().unwrap_or_default(),
                    })
                    .collect(),
                participants: rt
                    .members
                    .values()
                    .map(|m| ParticipantView {
                        participant_id: m.p.id.clone(),
                        roles: m.p.roles.iter().copied().collect(),
                        poa: m.poa.clone(),
                        iface: m.iface.to_string(),
                        attached: m.face.is_some(),
                        published: m.p.stats.published,
                        delivered: m.p.stats.delivered,
                    })
                    .collect(),
                roster_version: rt.sync.state.version(),
                footprint: rt.footprint.iter().cloned().collect(),
            })
            .collect()
    }

    pub fn forwarder_views(&self) -> Vec<ForwarderStateView> {
        self.fwd
            .iter()
            .map(|(node, f)| {
                let mut slices: Vec<SliceId> = f.slices().collect();
                slices.sort();
                ForwarderStateView {
                    node_id: node.clone(),
                    slices: slices
                        .into_iter()
                        .map(|sid| {
                            let t = f.tables(sid).expect("listed");
                            ForwarderSliceView {
                                slice_id: sid.0,
                                slice: self.slices.get(&sid).map_or_else(|| "control".to_string(), |s| s.name.clone()),
                                pit_size: t.pit.len(),
                                cs_entries: t.cs.len(),
                                cs_bytes: t.cs.used_bytes(),
                                cs_budget_bytes: t.cs.budget_bytes(),
                                fib: t
                                    .fib
                                    .entries()
                                    .into_iter()
                                    .map(|e| FibRow {
                                        prefix: e.prefix.to_string(),
                                        nexthops: e.nexthops.iter().map(|h| routing::face_label(self, node, *h)).collect(),
                                    })
                                    .collect(),
                                counters: t.counters,
                                conserved: t.counters.is_conserved(),
                            }
                        })
                        .collect(),
                }
            })
            .collect()
    }

    pub fn metrics(&self) -> Metrics {
        let slices = self
            .slices
            .values()
            .map(|rt| {
                let mut m = SliceMetrics {
                    slice_id: rt.id.0,
                    name: rt.name.clone(),
                    published: 0,
                    delivered: 0,
                    served: 0,
                    retries: 0,
                    abandoned: 0,
                    mean_latency_ms: None,
                    cs_hits: 0,
                    handoffs: rt.reports.clone(),
                };
                let mut t = rt.departed;
                for p in rt.members.values() {
                    t += p.p.stats;
                }
                m.published = t.published;
                m.delivered = t.delivered;
                m.served = t.served;
                m.retries = t.retries;
                m.abandoned = t.abandoned;
                if t.delivered > 0 {
                    m.mean_latency_ms = Some(t.latency_sum_us as f64 / t.delivered as f64 / 1000.0);
                }
                m.cs_hits = rt
                    .footprint
                    .iter()
                    .filter_map(|n| self.fwd.get(n).and_then(|f| f.tables(rt.id)))
                    .map(|t| t.counters.cs_hits)
                    .sum();
                m
            })
            .collect();
        Metrics {
            schema_version: SCHEMA_VERSION,
            t_ms: self.now().as_ms(),
            slices,
            ledger: self.ledger.snapshot(),
        }
    }

    pub fn views(&self) -> Views {
        Views {
            schema_version: SCHEMA_VERSION,
            t_ms: self.now().as_ms(),
            slices: self.slice_views(),
            forwarders: self.forwarder_views(),
            metrics: self.metrics(),
        }
    }
}
