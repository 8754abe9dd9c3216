//! Physical topology: nodes, inter-node links and PoA access links.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    AccessPoa,
    Edge,
    Core,
    Datacenter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AccessType {
    #[serde(rename = "LTE", alias = "lte")]
    Lte,
    #[serde(rename = "WiFi", alias = "wifi")]
    WiFi,
    #[serde(rename = "Ethernet", alias = "ethernet")]
    Ethernet,
}

impl AccessType {
    /// Default (latency_ms, bandwidth_mbps).
    pub fn preset(self) -> (f64, f64) {
        match self {
            AccessType::Lte => (50.0, 20.0),
            AccessType::WiFi => (10.0, 100.0),
            AccessType::Ethernet => (1.0, 1000.0),
        }
    }
}

impl fmt::Display for AccessType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessType::Lte => "LTE",
            AccessType::WiFi => "WiFi",
            AccessType::Ethernet => "Ethernet",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysNode {
    pub id: String,
    pub role: NodeRole,
    pub compute: u64,
    pub storage_mb: u64,
    pub domain: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysLink {
    pub id: String,
    pub a: String,
    pub b: String,
    pub bandwidth_mbps: f64,
    pub latency_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub access_type: Option<AccessType>,
}

impl PhysLink {
    pub fn is_access(&self) -> bool {
        self.access_type.is_some()
    }

    /// The far endpoint as seen from `node`.
    pub fn other(&self, node: &str) -> Option<&str> {
        if self.a == node {
            Some(&self.b)
        } else if self.b == node {
            Some(&self.a)
        } else {
            None
        }
    }

    pub fn bandwidth_kbps(&self) -> u64 {
        (self.bandwidth_mbps * 1000.0).round() as u64
    }

    pub fn latency_us(&self) -> u64 {
        (self.latency_ms * 1000.0).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invalid topology: {0}")]
    Validation(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyDoc {
    nodes: Vec<NodeDoc>,
    links: Vec<LinkDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    role: NodeRole,
    compute: i64,
    storage_mb: i64,
    domain: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    id: String,
    a: String,
    b: String,
    #[serde(default)]
    bandwidth_mbps: Option<f64>,
    #[serde(default)]
    latency_ms: Option<f64>,
    #[serde(default)]
    access_type: Option<AccessType>,
}

#[derive(Debug, Clone)]
pub struct Topology {
    nodes: BTreeMap<String, PhysNode>,
    links: BTreeMap<String, PhysLink>,
    // node -> [(link id, peer)] over inter-node links, sorted by link id
    adjacency: BTreeMap<String, Vec<(String, String)>>,
    // poa -> access link ids
    access: BTreeMap<String, Vec<String>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.contains('/') && !id.chars().any(char::is_whitespace)
}

impl Topology {
    /// Parses and validates a JSON topology document.
    pub fn load(document: &str) -> Result<Topology, TopologyError> {
        let de = &mut serde_json::Deserializer::from_str(document);
        let doc: TopologyDoc = serde_path_to_error::deserialize(de).map_err(|e| TopologyError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        Self::from_doc(doc)
    }

    fn from_doc(doc: TopologyDoc) -> Result<Topology, TopologyError> {
        let invalid = |m: String| Err(TopologyError::Validation(m));
        let mut nodes = BTreeMap::new();
        for n in doc.nodes {
            if !valid_id(&n.id) {
                return invalid(format!("bad node id {:?}", n.id));
            }
            if n.compute <= 0 || n.storage_mb <= 0 {
                return invalid(format!("node {} has non-positive capacity", n.id));
            }
            if n.domain.is_empty() {
                return invalid(format!("node {} has an empty domain", n.id));
            }
            let node = PhysNode {
                id: n.id.clone(),
                role: n.role,
                compute: n.compute as u64,
                storage_mb: n.storage_mb as u64,
                domain: n.domain,
            };
            if nodes.insert(n.id.clone(), node).is_some() {
                return invalid(format!("duplicate node id {}", n.id));
            }
        }
        if nodes.is_empty() {
            return invalid("topology has no nodes".into());
        }

        let mut links = BTreeMap::new();
        for (idx, l) in doc.links.into_iter().enumerate() {
            if !valid_id(&l.id) {
                return invalid(format!("bad link id {:?}", l.id));
            }
            let (latency_ms, bandwidth_mbps) = match l.access_type {
                Some(kind) => {
                    let (lat, bw) = kind.preset();
                    (l.latency_ms.unwrap_or(lat), l.bandwidth_mbps.unwrap_or(bw))
                }
                None => match (l.latency_ms, l.bandwidth_mbps) {
                    (Some(lat), Some(bw)) => (lat, bw),
                    (None, _) => {
                        return Err(TopologyError::Schema {
                            path: format!("links[{idx}].latency_ms"),
                            message: "missing field `latency_ms`".into(),
                        })
                    }
                    (_, None) => {
                        return Err(TopologyError::Schema {
                            path: format!("links[{idx}].bandwidth_mbps"),
                            message: "missing field `bandwidth_mbps`".into(),
                        })
                    }
                },
            };
            if !(bandwidth_mbps > 0.0 && bandwidth_mbps.is_finite()) {
                return invalid(format!("link {} has non-positive bandwidth", l.id));
            }
            if !(latency_ms > 0.0 && latency_ms.is_finite()) {
                return invalid(format!("link {} has non-positive latency", l.id));
            }
            let is_poa = |id: &str| nodes.get(id).is_some_and(|n: &PhysNode| n.role == NodeRole::AccessPoa);
            match l.access_type {
                None => {
                    for end in [&l.a, &l.b] {
                        if !nodes.contains_key(end.as_str()) {
                            return invalid(format!("link {} references unknown node {}", l.id, end));
                        }
                    }
                    if l.a == l.b {
                        return invalid(format!("link {} is a self-loop", l.id));
                    }
                }
                Some(_) => {
                    let a_known = nodes.contains_key(&l.a);
                    let b_known = nodes.contains_key(&l.b);
                    let ok = (is_poa(&l.a) && !b_known) || (is_poa(&l.b) && !a_known);
                    if !ok {
                        return invalid(format!(
                            "access link {} must join one access_poa node to a client-side endpoint",
                            l.id
                        ));
                    }
                }
            }
            let link = PhysLink {
                id: l.id.clone(),
                a: l.a,
                b: l.b,
                bandwidth_mbps,
                latency_ms,
                access_type: l.access_type,
            };
            if links.insert(l.id.clone(), link).is_some() {
                return invalid(format!("duplicate link id {}", l.id));
            }
        }

        let mut adjacency: BTreeMap<String, Vec<(String, String)>> =
            nodes.keys().map(|k| (k.clone(), Vec::new())).collect();
        let mut access: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for link in links.values() {
            if link.is_access() {
                let poa = if nodes.contains_key(&link.a) { &link.a } else { &link.b };
                access.entry(poa.clone()).or_default().push(link.id.clone());
            } else {
                adjacency.get_mut(&link.a).unwrap().push((link.id.clone(), link.b.clone()));
                adjacency.get_mut(&link.b).unwrap().push((link.id.clone(), link.a.clone()));
            }
        }

        let topo = Topology {
            nodes,
            links,
            adjacency,
            access,
        };
        if topo.nodes.len() < 2 || topo.infra_links().next().is_none() {
            return invalid("topology needs at least two connected nodes".into());
        }
        let reached = topo.hop_distances(topo.nodes.keys().next().unwrap());
        if reached.len() != topo.nodes.len() {
            let missing: Vec<&String> = topo.nodes.keys().filter(|k| !reached.contains_key(*k)).collect();
            return invalid(format!("topology is disconnected; unreachable: {missing:?}"));
        }
        Ok(topo)
    }

    pub fn node(&self, id: &str) -> Option<&PhysNode> {
        self.nodes.get(id)
    }

    pub fn link(&self, id: &str) -> Option<&PhysLink> {
        self.links.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &PhysNode> {
        self.nodes.values()
    }

    pub fn links(&self) -> impl Iterator<Item = &PhysLink> {
        self.links.values()
    }

    pub fn infra_links(&self) -> impl Iterator<Item = &PhysLink> {
        self.links.values().filter(|l| !l.is_access())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Inter-node neighbours of `node` as (link id, peer), in link id order.
    pub fn neighbors(&self, node: &str) -> &[(String, String)] {
        self.adjacency.get(node).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn access_links(&self, poa: &str) -> Vec<&PhysLink> {
        self.access
            .get(poa)
            .map(|ids| ids.iter().filter_map(|id| self.links.get(id)).collect())
            .unwrap_or_default()
    }

    /// First access link (by id) of `poa` with the given type.
    pub fn access_link(&self, poa: &str, kind: AccessType) -> Option<&PhysLink> {
        self.access_links(poa).into_iter().find(|l| l.access_type == Some(kind))
    }

    pub fn domains(&self) -> BTreeSet<String> {
        self.nodes.values().map(|n| n.domain.clone()).collect()
    }

    pub fn poas(&self) -> impl Iterator<Item = &PhysNode> {
        self.nodes.values().filter(|n| n.role == NodeRole::AccessPoa)
    }

    /// BFS hop counts from `from` over inter-node links.
    pub fn hop_distances(&self, from: &str) -> BTreeMap<String, u32> {
        let mut dist = BTreeMap::new();
        if !self.nodes.contains_key(from) {
            return dist;
        }
        dist.insert(from.to_string(), 0);
        let mut queue = VecDeque::from([from.to_string()]);
        while let Some(cur) = queue.pop_front() {
            let d = dist[&cur];
            for (_, peer) in self.neighbors(&cur) {
                if !dist.contains_key(peer) {
                    dist.insert(peer.clone(), d + 1);
                    queue.push_back(peer.clone());
                }
            }
        }
        dist
    }

    pub fn hop_distance(&self, a: &str, b: &str) -> Option<u32> {
        self.hop_distances(a).get(b).copied()
    }
}
