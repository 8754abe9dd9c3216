//! Per-slice producer mobility: PoA prefix maps, control names and handoff reports.
//!
//! Control Interests travel in the control slice under `/poa/<node>/...`:
//!
//! ```text
//! /poa/<old>/mobility/<slice>/<new>/<epoch>/<prefix...>    new PoA -> old PoA
//! /poa/<ingress>/update/<slice>/<new>/<epoch>/<prefix...>   old PoA -> ingress PoA
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::icn::{FaceId, HintOrigin, SliceId};
use crate::name::Name;

pub const POA_ROOT: &str = "poa";
pub const DEFAULT_DETACH_GAP_MS: u64 = 50;

/// Topological name of a PoA.
pub fn poa_name(node: &str) -> Name {
    Name::from_components([POA_ROOT, node])
}

/// Node id from a topological name.
pub fn poa_node(name: &Name) -> Option<&str> {
    (name.len() == 2 && name.get(0) == Some(POA_ROOT)).then(|| name.get(1)).flatten()
}

pub fn notify_name(old: &str, slice: &str, new_poa: &str, epoch: u64, prefix: &Name) -> Name {
    poa_name(old)
        .child("mobility")
        .child(slice)
        .child(new_poa)
        .child(epoch.to_string())
        .join(prefix)
}

pub fn update_name(ingress: &str, slice: &str, new_poa: &str, epoch: u64, prefix: &Name) -> Name {
    poa_name(ingress)
        .child("update")
        .child(slice)
        .child(new_poa)
        .child(epoch.to_string())
        .join(prefix)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlMessage {
    Notify {
        to: String,
        slice: String,
        new_poa: String,
        epoch: u64,
        prefix: Name,
    },
    Update {
        to: String,
        slice: String,
        new_poa: String,
        epoch: u64,
        prefix: Name,
    },
}

impl ControlMessage {
    pub fn parse(name: &Name) -> Option<ControlMessage> {
        if name.get(0) != Some(POA_ROOT) {
            return None;
        }
        let to = name.get(1)?.to_string();
        let slice = name.get(3)?.to_string();
        match name.get(2)? {
            "mobility" => Some(ControlMessage::Notify {
                to,
                slice,
                new_poa: name.get(4)?.to_string(),
                epoch: name.get(5)?.parse().ok()?,
                prefix: name.strip_prefix_len(6)?,
            }),
            "update" => Some(ControlMessage::Update {
                to,
                slice,
                new_poa: name.get(4)?.to_string(),
                epoch: name.get(5)?.parse().ok()?,
                prefix: name.strip_prefix_len(6)?,
            }),
            _ => None,
        }
    }
}

/// Slice a control name is about, if it is a control name.
pub fn control_subject(name: &Name) -> Option<&str> {
    (name.get(0) == Some(POA_ROOT) && matches!(name.get(2), Some("mobility" | "update")))
        .then(|| name.get(3))
        .flatten()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrefixMapping {
    pub current: Name,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_face: Option<FaceId>,
    pub epoch: u64,
}

/// What a PoA does with an unhinted Interest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    /// No mapping applies; use the slice FIB.
    Fib,
    /// The producer is attached here.
    Local(FaceId),
    /// The producer is mapped here but detached; park the Interest.
    Hold,
    /// The producer is elsewhere; forward with a hint.
    Redirect { target: Name, origin: HintOrigin },
}

/// Mobility state of one PoA.
#[derive(Debug, Clone)]
pub struct PoaState {
    node_id: String,
    topo_name: Name,
    maps: BTreeMap<SliceId, BTreeMap<Name, PrefixMapping>>,
    /// Ingress PoAs seen for each prefix while it was mapped here.
    provenance: BTreeMap<(SliceId, Name), BTreeSet<String>>,
    notified: BTreeSet<(SliceId, Name, String, u64)>,
}

impl PoaState {
    pub fn new(node_id: &str) -> Self {
        PoaState {
            node_id: node_id.to_string(),
            topo_name: poa_name(node_id),
            maps: BTreeMap::new(),
            provenance: BTreeMap::new(),
            notified: BTreeSet::new(),
        }
    }

    pub fn node_id(&self) -> &str {
        &self.node_id
    }

    pub fn topo_name(&self) -> &Name {
        &self.topo_name
    }

    pub fn mapping(&self, slice: SliceId, prefix: &Name) -> Option<&PrefixMapping> {
        self.maps.get(&slice)?.get(prefix)
    }

    pub fn mappings(&self, slice: SliceId) -> impl Iterator<Item = (&Name, &PrefixMapping)> {
        self.maps.get(&slice).into_iter().flatten()
    }

    /// Longest mapped prefix of `name`.
    pub fn lookup(&self, slice: SliceId, name: &Name) -> Option<(&Name, &PrefixMapping)> {
        self.maps
            .get(&slice)?
            .iter()
            .filter(|(p, _)| p.is_prefix_of(name))
            .max_by_key(|(p, _)| p.len())
    }

    /// Producer attached on `face`. Stale epochs are refused.
    pub fn attach(&mut self, slice: SliceId, prefix: &Name, face: FaceId, epoch: u64) -> bool {
        let map = self.maps.entry(slice).or_default();
        if map.get(prefix).is_some_and(|m| m.epoch >= epoch) {
            return false;
        }
        map.insert(
            prefix.clone(),
            PrefixMapping {
                current: self.topo_name.clone(),
                local_face: Some(face),
                epoch,
            },
        );
        true
    }

    /// Producer left its access face; the mapping stays here until someone updates it.
    pub fn detach(&mut self, slice: SliceId, prefix: &Name) {
        if let Some(m) = self.maps.get_mut(&slice).and_then(|m| m.get_mut(prefix)) {
            m.local_face = None;
        }
    }

    /// Points `prefix` at another PoA. Returns false for stale or repeated epochs.
    pub fn apply_update(&mut self, slice: SliceId, prefix: &Name, new_poa: &str, epoch: u64) -> bool {
        let map = self.maps.entry(slice).or_default();
        if map.get(prefix).is_some_and(|m| m.epoch >= epoch) {
            return false;
        }
        map.insert(
            prefix.clone(),
            PrefixMapping {
                current: poa_name(new_poa),
                local_face: None,
                epoch,
            },
        );
        true
    }

    pub fn remove_prefix(&mut self, slice: SliceId, prefix: &Name) {
        if let Some(m) = self.maps.get_mut(&slice) {
            m.remove(prefix);
        }
        self.provenance.remove(&(slice, prefix.clone()));
        self.notified.retain(|(s, p, _, _)| !(*s == slice && p == prefix));
    }

    pub fn clear_slice(&mut self, slice: SliceId) {
        self.maps.remove(&slice);
        self.provenance.retain(|(s, _), _| *s != slice);
        self.notified.retain(|(s, _, _, _)| *s != slice);
    }

    pub fn record_ingress(&mut self, slice: SliceId, prefix: &Name, ingress: &str) {
        if ingress != self.node_id {
            self.provenance
                .entry((slice, prefix.clone()))
                .or_default()
                .insert(ingress.to_string());
        }
    }

    pub fn take_ingresses(&mut self, slice: SliceId, prefix: &Name) -> BTreeSet<String> {
        self.provenance.remove(&(slice, prefix.clone())).unwrap_or_default()
    }

    /// True the first time `ingress` is told about `epoch` of `prefix`.
    pub fn mark_notified(&mut self, slice: SliceId, prefix: &Name, ingress: &str, epoch: u64) -> bool {
        ingress != self.node_id && self.notified.insert((slice, prefix.clone(), ingress.to_string(), epoch))
    }

    /// Mapping-based decision for an Interest without a pending hint.
    /// `from_ingress` is true when the Interest entered the network here.
    pub fn decide(&self, slice: SliceId, name: &Name, from_ingress: bool) -> Decision {
        let Some((_, m)) = self.lookup(slice, name) else {
            return Decision::Fib;
        };
        if let Some(face) = m.local_face {
            return Decision::Local(face);
        }
        if m.current == self.topo_name {
            return Decision::Hold;
        }
        Decision::Redirect {
            target: m.current.clone(),
            origin: if from_ingress {
                HintOrigin::IngressMapping
            } else {
                HintOrigin::LateBinding
            },
        }
    }
}

/// Outcome of one handoff, finalised once its tracked Interests have settled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HandoffReport {
    pub handoff_id: u64,
    pub slice: String,
    pub participant: String,
    pub from: String,
    pub from_iface: String,
    pub to: String,
    pub to_iface: String,
    pub at_ms: f64,
    pub gap_ms: u64,
    pub mobility_enabled: bool,
    /// Interests pending toward the producer at the old PoA when it detached.
    pub interests_pending: u64,
    /// Tracked Interests the old PoA re-expressed toward the new PoA.
    pub interests_late_bound: u64,
    /// Tracked Interests that expired at the old PoA without Data.
    pub interests_lost: u64,
    pub stretch_before: Option<f64>,
    pub stretch_after: Option<f64>,
}

/// Forwarders traversed over the shortest-path forwarder count. `hop_count` is the
/// Interest's count on reaching the producer's PoA; `shortest_hops` counts links.
pub fn stretch(hop_count: u32, shortest_hops: u32) -> f64 {
    hop_count as f64 / (shortest_hops + 1) as f64
}
