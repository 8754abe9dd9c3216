//! Greedy node-then-path embedding with all-or-nothing reservations.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::graph::{ServiceGraph, VLink, VNode};
use super::partition::Subgraph;
use crate::substrate::{shortest_latency_path, CapacityLedger, ReservationId, Resource, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedFailure {
    Capacity,
    Latency,
    Disconnected,
}

impl fmt::Display for EmbedFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbedFailure::Capacity => "capacity",
            EmbedFailure::Latency => "latency",
            EmbedFailure::Disconnected => "disconnected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("embedding failed ({reason}): {detail}")]
pub struct EmbeddingError {
    pub reason: EmbedFailure,
    pub detail: String,
}

impl EmbeddingError {
    fn new(reason: EmbedFailure, detail: impl Into<String>) -> Self {
        EmbeddingError {
            reason,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AllocationMatrix {
    pub node_map: BTreeMap<String, String>,
    pub link_map: BTreeMap<String, Vec<String>>,
    pub path_latency_ms: BTreeMap<String, f64>,
    #[serde(skip)]
    pub vnode_reservations: BTreeMap<String, Vec<ReservationId>>,
    #[serde(skip)]
    pub vlink_reservations: BTreeMap<String, Vec<ReservationId>>,
}

impl AllocationMatrix {
    pub fn reservations(&self) -> Vec<ReservationId> {
        self.vnode_reservations
            .values()
            .chain(self.vlink_reservations.values())
            .flatten()
            .copied()
            .collect()
    }

    /// Releases every reservation held by this matrix.
    pub fn release(&mut self, ledger: &mut CapacityLedger) -> Vec<(Resource, u64)> {
        let released = self
            .reservations()
            .into_iter()
            .filter_map(|id| ledger.release(id).ok())
            .collect();
        self.vnode_reservations.clear();
        self.vlink_reservations.clear();
        released
    }

    /// Substrate nodes hosting a vnode or lying on a mapped path.
    pub fn footprint(&self, topo: &Topology) -> std::collections::BTreeSet<String> {
        let mut nodes: std::collections::BTreeSet<String> = self.node_map.values().cloned().collect();
        for path in self.link_map.values() {
            for l in path {
                if let Some(link) = topo.link(l) {
                    nodes.insert(link.a.clone());
                    nodes.insert(link.b.clone());
                }
            }
        }
        nodes
    }
}

fn place_vnode(
    v: &VNode,
    domain: &str,
    neighbors: &[(String, Option<String>)],
    topo: &Topology,
    ledger: &mut CapacityLedger,
    alloc: &mut AllocationMatrix,
) -> Result<(), EmbeddingError> {
    let fits = |ledger: &CapacityLedger, node: &str| {
        ledger.residual(&Resource::Compute(node.to_string())) >= v.compute_units
            && ledger.residual(&Resource::Storage(node.to_string())) >= v.storage_mb()
    };
    let host = match &v.pin_hint {
        Some(pin) => {
            if topo.node(pin).is_none() {
                return Err(EmbeddingError::new(
                    EmbedFailure::Disconnected,
                    format!("{} is pinned to unknown node {pin}", v.vnode_id),
                ));
            }
            if !fits(ledger, pin) {
                return Err(EmbeddingError::new(
                    EmbedFailure::Capacity,
                    format!("{} does not fit on pinned node {pin}", v.vnode_id),
                ));
            }
            pin.clone()
        }
        None => {
            // placed neighbours count at their image, unplaced pinned ones at their pin
            let anchors: Vec<&String> = neighbors
                .iter()
                .filter_map(|(n, pin)| alloc.node_map.get(n).or(pin.as_ref()))
                .collect();
            let mut best: Option<(u64, String)> = None;
            for node in topo.nodes().filter(|n| n.domain == domain) {
                if !fits(ledger, &node.id) {
                    continue;
                }
                let hops = topo.hop_distances(&node.id);
                let score: u64 = anchors.iter().map(|a| hops.get(*a).copied().unwrap_or(u32::MAX) as u64).sum();
                // nodes() is in id order, so strict < keeps the lowest id on ties
                if best.as_ref().is_none_or(|(s, _)| score < *s) {
                    best = Some((score, node.id.clone()));
                }
            }
            match best {
                Some((_, node)) => node,
                None => {
                    return Err(EmbeddingError::new(
                        EmbedFailure::Capacity,
                        format!("no node in domain {domain} can host {}", v.vnode_id),
                    ))
                }
            }
        }
    };
    let mut ids = Vec::new();
    if v.compute_units > 0 {
        ids.push(ledger.allocate(Resource::Compute(host.clone()), v.compute_units).expect("checked fit"));
    }
    if v.storage_mb() > 0 {
        ids.push(ledger.allocate(Resource::Storage(host.clone()), v.storage_mb()).expect("checked fit"));
    }
    alloc.node_map.insert(v.vnode_id.clone(), host);
    alloc.vnode_reservations.insert(v.vnode_id.clone(), ids);
    Ok(())
}

fn map_vlink(
    l: &VLink,
    topo: &Topology,
    ledger: &mut CapacityLedger,
    alloc: &mut AllocationMatrix,
) -> Result<(), EmbeddingError> {
    let from = alloc.node_map[&l.a].clone();
    let to = alloc.node_map[&l.b].clone();
    let budget_us = l.latency_budget_us();
    let need = l.bandwidth_kbps;
    let path = shortest_latency_path(topo, &from, &to, |link| {
        ledger.residual(&Resource::Bandwidth(link.id.clone())) >= need
    });
    let unconstrained = || shortest_latency_path(topo, &from, &to, |_| true);
    let path = match path {
        Some(p) => p,
        None => {
            let reason = if unconstrained().is_some() {
                EmbedFailure::Capacity
            } else {
                EmbedFailure::Disconnected
            };
            return Err(EmbeddingError::new(
                reason,
                format!("no path {from} -> {to} with {need} kbps for {}", l.id),
            ));
        }
    };
    if path.latency_us > budget_us {
        let best = unconstrained().map_or(u64::MAX, |p| p.latency_us);
        let reason = if best > budget_us {
            EmbedFailure::Latency
        } else {
            EmbedFailure::Capacity
        };
        return Err(EmbeddingError::new(
            reason,
            format!(
                "{} needs <= {} ms; best feasible path {from} -> {to} is {} ms",
                l.id,
                l.latency_budget_ms,
                path.latency_ms()
            ),
        ));
    }
    let mut ids = Vec::new();
    for link in &path.links {
        ids.push(
            ledger
                .allocate(Resource::Bandwidth(link.clone()), need)
                .expect("path filtered on residual bandwidth"),
        );
    }
    alloc.path_latency_ms.insert(l.id.clone(), path.latency_ms());
    alloc.link_map.insert(l.id.clone(), path.links);
    alloc.vlink_reservations.insert(l.id.clone(), ids);
    Ok(())
}

/// Greedy embedding of one subgraph into `alloc`.
/// Vnodes go in descending compute order (ties by id); a vlink is mapped as soon as
/// both endpoint images are known. Leaves partial reservations in place on error.
fn embed_into(
    sub: &Subgraph,
    neighbors_of: &dyn Fn(&str) -> Vec<(String, Option<String>)>,
    topo: &Topology,
    ledger: &mut CapacityLedger,
    alloc: &mut AllocationMatrix,
) -> Result<(), EmbeddingError> {
    let mut order: Vec<&VNode> = sub.vnodes.iter().collect();
    order.sort_by(|a, b| b.compute_units.cmp(&a.compute_units).then_with(|| a.vnode_id.cmp(&b.vnode_id)));
    for v in order {
        let neighbors = neighbors_of(&v.vnode_id);
        place_vnode(v, &sub.domain_id, &neighbors, topo, ledger, alloc)?;
    }
    let mut vlinks: Vec<&VLink> = sub.vlinks.iter().chain(&sub.stubs).collect();
    vlinks.sort_by(|a, b| a.id.cmp(&b.id));
    for l in vlinks {
        let placed = alloc.node_map.contains_key(&l.a) && alloc.node_map.contains_key(&l.b);
        if placed && !alloc.link_map.contains_key(&l.id) {
            map_vlink(l, topo, ledger, alloc)?;
        }
    }
    Ok(())
}

/// Embeds a single subgraph on its own. Stubs whose far end lies outside the
/// subgraph are left unmapped. Nothing stays reserved on error.
pub fn embed(sub: &Subgraph, topo: &Topology, ledger: &mut CapacityLedger) -> Result<AllocationMatrix, EmbeddingError> {
    let neighbors_of = |id: &str| -> Vec<(String, Option<String>)> {
        sub.vlinks
            .iter()
            .chain(&sub.stubs)
            .filter_map(|l| {
                if l.a == id {
                    Some(l.b.clone())
                } else if l.b == id {
                    Some(l.a.clone())
                } else {
                    None
                }
            })
            .map(|n| {
                let pin = sub.vnodes.iter().find(|v| v.vnode_id == n).and_then(|v| v.pin_hint.clone());
                (n, pin)
            })
            .collect()
    };
    let mut alloc = AllocationMatrix::default();
    match embed_into(sub, &neighbors_of, topo, ledger, &mut alloc) {
        Ok(()) => Ok(alloc),
        Err(e) => {
            alloc.release(ledger);
            Err(e)
        }
    }
}

/// Embeds every subgraph in order as one atomic step.
pub fn embed_all(
    g: &ServiceGraph,
    subs: &[Subgraph],
    topo: &Topology,
    ledger: &mut CapacityLedger,
) -> Result<AllocationMatrix, EmbeddingError> {
    let neighbors_of = |id: &str| -> Vec<(String, Option<String>)> {
        g.neighbors(id)
            .into_iter()
            .map(|n| (n.to_string(), g.vnode(n).and_then(|v| v.pin_hint.clone())))
            .collect()
    };
    let mut alloc = AllocationMatrix::default();
    for sub in subs {
        if let Err(e) = embed_into(sub, &neighbors_of, topo, ledger, &mut alloc) {
            alloc.release(ledger);
            return Err(e);
        }
    }
    Ok(alloc)
}
