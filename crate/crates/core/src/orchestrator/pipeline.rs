//! Template -> graph -> partition -> embedding, plus teardown and in-place adaptation.

use serde::Serialize;
use thiserror::Error;

use super::embed::{embed_all, AllocationMatrix, EmbeddingError};
use super::graph::{build_service_graph, ServiceGraph};
use super::partition::{partition, Subgraph};
use super::template::{SliceTemplate, TemplateError};
use crate::substrate::{CapacityLedger, NodeRole, ReservationId, Resource, Topology};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdmitError {
    #[error("template error: {0}")]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Admission {
    pub graph: ServiceGraph,
    pub subgraphs: Vec<Subgraph>,
    pub alloc: AllocationMatrix,
}

/// Runs the whole creation pipeline. On error nothing stays reserved.
pub fn admit(t: &SliceTemplate, topo: &Topology, ledger: &mut CapacityLedger) -> Result<Admission, AdmitError> {
    let graph = build_service_graph(t)?;
    for (i, site) in t.sites.iter().enumerate() {
        match topo.node(&site.poa_node_id) {
            Some(n) if n.role == NodeRole::AccessPoa => {}
            Some(_) => {
                return Err(TemplateError::new(
                    format!("sites[{i}].poa_node_id"),
                    format!("{} is not an access_poa node", site.poa_node_id),
                )
                .into())
            }
            None => {
                return Err(TemplateError::new(
                    format!("sites[{i}].poa_node_id"),
                    format!("unknown node {}", site.poa_node_id),
                )
                .into())
            }
        }
    }
    let subgraphs = partition(&graph, topo).map_err(|e| TemplateError::new("sites", e.to_string()))?;
    let alloc = embed_all(&graph, &subgraphs, topo, ledger)?;
    Ok(Admission {
        graph,
        subgraphs,
        alloc,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ResourceTotals {
    pub compute: u64,
    pub storage_mb: u64,
    pub bandwidth_kbps: u64,
}

impl ResourceTotals {
    fn add(&mut self, r: &Resource, amount: u64) {
        match r {
            Resource::Compute(_) => self.compute += amount,
            Resource::Storage(_) => self.storage_mb += amount,
            Resource::Bandwidth(_) => self.bandwidth_kbps += amount,
        }
    }
}

/// Releases every reservation of `alloc`.
pub fn release_all(alloc: &mut AllocationMatrix, ledger: &mut CapacityLedger) -> ResourceTotals {
    let mut totals = ResourceTotals::default();
    for (r, amount) in alloc.release(ledger) {
        totals.add(&r, amount);
    }
    totals
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptReport {
    /// True when no reservation had to grow.
    pub in_place_shrink: bool,
    pub released: ResourceTotals,
    pub added: ResourceTotals,
    pub participants: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdaptError {
    #[error("template error: {0}")]
    Template(#[from] TemplateError),
    #[error("adaptation rejected: {0}")]
    Rejected(String),
}

/// Re-runs the load model with new per-site counts and resizes the existing
/// reservations on the same mapping. Either every resize applies or none does.
pub fn adapt(
    t: &SliceTemplate,
    alloc: &AllocationMatrix,
    counts: &[u32],
    ledger: &mut CapacityLedger,
) -> Result<(SliceTemplate, ServiceGraph, AdaptReport), AdaptError> {
    let new_t = t.with_participants(counts)?;
    let new_g = build_service_graph(&new_t)?;

    // (reservation, target amount) for every reservation of the slice
    let mut plan: Vec<(ReservationId, u64)> = Vec::new();
    for v in &new_g.vnodes {
        for id in alloc.vnode_reservations.get(&v.vnode_id).into_iter().flatten() {
            let (r, _) = ledger.reservation(*id).expect("live reservation");
            let target = match r {
                Resource::Compute(_) => v.compute_units,
                Resource::Storage(_) => v.storage_mb(),
                Resource::Bandwidth(_) => unreachable!("vnodes hold no bandwidth"),
            };
            plan.push((*id, target));
        }
    }
    for l in &new_g.vlinks {
        for id in alloc.vlink_reservations.get(&l.id).into_iter().flatten() {
            plan.push((*id, l.bandwidth_kbps));
        }
    }

    // shrinks first so a slice can trade capacity between its own reservations
    plan.sort_by_key(|(id, target)| {
        let current = ledger.reservation(*id).map_or(0, |(_, a)| *a);
        (*target > current, *id)
    });
    let mut applied: Vec<(ReservationId, u64)> = Vec::new();
    let mut report = AdaptReport {
        in_place_shrink: true,
        released: ResourceTotals::default(),
        added: ResourceTotals::default(),
        participants: counts.to_vec(),
    };
    for (id, target) in plan {
        let (resource, current) = ledger.reservation(id).cloned().expect("live reservation");
        if target == current {
            continue;
        }
        match ledger.resize(id, target) {
            Ok(old) => {
                applied.push((id, old));
                if target < current {
                    report.released.add(&resource, current - target);
                } else {
                    report.in_place_shrink = false;
                    report.added.add(&resource, target - current);
                }
            }
            Err(e) => {
                for (id, old) in applied.into_iter().rev() {
                    ledger.resize(id, old).expect("restoring a previous amount always fits");
                }
                return Err(AdaptError::Rejected(e.to_string()));
            }
        }
    }
    Ok((new_t, new_g, report))
}
