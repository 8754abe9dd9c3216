//! Minimum-latency paths over inter-node links.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use super::topology::{PhysLink, Topology};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub nodes: Vec<String>,
    pub links: Vec<String>,
    pub latency_us: u64,
}

impl Path {
    pub fn latency_ms(&self) -> f64 {
        self.latency_us as f64 / 1000.0
    }
}

/// Dijkstra from `from` over links accepted by `usable`.
/// Returns node -> (distance in µs, predecessor (link, node)).
pub fn latency_tree<F>(topo: &Topology, from: &str, usable: F) -> BTreeMap<String, (u64, Option<(String, String)>)>
where
    F: Fn(&PhysLink) -> bool,
{
    let mut best: BTreeMap<String, (u64, Option<(String, String)>)> = BTreeMap::new();
    if topo.node(from).is_none() {
        return best;
    }
    let mut done = std::collections::BTreeSet::new();
    let mut heap = BinaryHeap::new();
    best.insert(from.to_string(), (0, None));
    heap.push(Reverse((0u64, from.to_string())));
    while let Some(Reverse((dist, node))) = heap.pop() {
        if !done.insert(node.clone()) {
            continue;
        }
        for (link_id, peer) in topo.neighbors(&node) {
            let link = topo.link(link_id).expect("adjacency is consistent");
            if !usable(link) || done.contains(peer) {
                continue;
            }
            let cand = dist + link.latency_us();
            let better = best.get(peer).is_none_or(|(d, _)| cand < *d);
            if better {
                best.insert(peer.clone(), (cand, Some((link_id.clone(), node.clone()))));
                heap.push(Reverse((cand, peer.clone())));
            }
        }
    }
    best
}

fn walk_back(tree: &BTreeMap<String, (u64, Option<(String, String)>)>, from: &str, to: &str) -> Option<Path> {
    let (latency_us, _) = tree.get(to)?;
    let mut nodes = vec![to.to_string()];
    let mut links = Vec::new();
    let mut cur = to.to_string();
    while cur != from {
        let (_, Some((link, prev))) = tree.get(&cur)? else {
            return None;
        };
        links.push(link.clone());
        nodes.push(prev.clone());
        cur = prev.clone();
    }
    nodes.reverse();
    links.reverse();
    Some(Path {
        nodes,
        links,
        latency_us: *latency_us,
    })
}

pub fn shortest_latency_path<F>(topo: &Topology, from: &str, to: &str, usable: F) -> Option<Path>
where
    F: Fn(&PhysLink) -> bool,
{
    let tree = latency_tree(topo, from, usable);
    walk_back(&tree, from, to)
}
