//! Controller-side route computation for the control slice and each conference slice.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{Emulator, Face};
use crate::conference::names;
use crate::icn::{FaceId, Fib, SliceId};
use crate::mobility::poa_name;
use crate::substrate::{latency_tree, NodeRole};

/// Next-hop face at every node toward `target`, using only links accepted by `usable`.
fn next_hops(em: &Emulator, target: &str, usable: impl Fn(&str) -> bool) -> BTreeMap<String, FaceId> {
    latency_tree(&em.topo, target, |l| usable(&l.id))
        .into_iter()
        .filter_map(|(node, (_, pred))| {
            let (link, _) = pred?;
            let face = em.link_face.get(&(node.clone(), link))?;
            Some((node, *face))
        })
        .collect()
}

/// `/poa/<X>` toward every PoA over the whole substrate; at X itself, the agent.
pub(super) fn install_control_routes(em: &mut Emulator) {
    let poas: Vec<String> = em.poas.keys().cloned().collect();
    for poa in poas {
        let prefix = poa_name(&poa);
        let hops = next_hops(em, &poa, |_| true);
        for (node, face) in hops {
            em.fwd.get_mut(&node).expect("node").tables_mut(SliceId::CONTROL).expect("control").fib.insert(prefix.clone(), vec![face]);
        }
        let agent = em.agent_face[&poa];
        em.fwd.get_mut(&poa).expect("node").tables_mut(SliceId::CONTROL).expect("control").fib.insert(prefix, vec![agent]);
    }
}

/// Recomputes the slice FIB on every footprint node from scratch.
pub(super) fn rebuild(em: &mut Emulator, id: SliceId) {
    let rt = &em.slices[&id];
    let links = rt.links.clone();
    let usable = |l: &str| links.contains(l);
    let mut fibs: BTreeMap<String, Fib> = rt.footprint.iter().map(|n| (n.clone(), Fib::new())).collect();
    let put = |fibs: &mut BTreeMap<String, Fib>, node: &str, prefix: &crate::Name, face: FaceId| {
        if let Some(fib) = fibs.get_mut(node) {
            fib.insert(prefix.clone(), vec![face]);
        }
    };

    let sync = names::sync_prefix(&rt.name);
    for (node, face) in next_hops(em, &rt.sync_node, usable) {
        put(&mut fibs, &node, &sync, face);
    }
    put(&mut fibs, &rt.sync_node, &sync, rt.sync_face());

    let mut tree_cache: BTreeMap<String, BTreeMap<String, FaceId>> = BTreeMap::new();
    let mut tree = |target: &str| -> BTreeMap<String, FaceId> {
        tree_cache.entry(target.to_string()).or_insert_with(|| next_hops(em, target, usable)).clone()
    };
    for m in rt.members.values() {
        let prefix = names::participant_prefix(&rt.name, &m.p.id);
        for (node, face) in tree(&m.home) {
            put(&mut fibs, &node, &prefix, face);
        }
        let (node, face) = &m.face_route;
        put(&mut fibs, node, &prefix, *face);
    }
    let poas: Vec<String> = rt
        .footprint
        .iter()
        .filter(|n| em.topo.node(n).is_some_and(|x| x.role == NodeRole::AccessPoa))
        .cloned()
        .collect();
    for poa in poas {
        let prefix = poa_name(&poa);
        for (node, face) in tree(&poa) {
            put(&mut fibs, &node, &prefix, face);
        }
    }
    for (node, fib) in fibs {
        if let Some(t) = em.fwd.get_mut(&node).and_then(|f| f.tables_mut(id)) {
            t.fib = fib;
        }
    }
}

/// Brings `node` into the slice footprint along a fewest-hop path to it.
/// Tables are provisioned without a capacity reservation.
pub(super) fn extend_footprint(em: &mut Emulator, id: SliceId, node: &str) {
    let rt = &em.slices[&id];
    if rt.footprint.contains(node) {
        return;
    }
    let mut prev: BTreeMap<String, (String, String)> = BTreeMap::new();
    let mut seen = BTreeSet::from([node.to_string()]);
    let mut queue = VecDeque::from([node.to_string()]);
    let mut hit = None;
    while let Some(n) = queue.pop_front() {
        if rt.footprint.contains(&n) {
            hit = Some(n);
            break;
        }
        for (link, peer) in em.topo.neighbors(&n) {
            if seen.insert(peer.clone()) {
                prev.insert(peer.clone(), (n.clone(), link.clone()));
                queue.push_back(peer.clone());
            }
        }
    }
    let Some(mut cur) = hit else { return };
    let mut new_nodes = vec![node.to_string()];
    let mut new_links = Vec::new();
    while let Some((back, link)) = prev.get(&cur) {
        new_links.push(link.clone());
        if back != node {
            new_nodes.push(back.clone());
        }
        cur = back.clone();
    }
    let budget = rt.cache_budget(em.config.cache_enabled);
    let rt = em.slices.get_mut(&id).expect("slice");
    for n in &new_nodes {
        if rt.footprint.insert(n.clone()) {
            em.fwd.get_mut(n).expect("node").provision(id, budget);
        }
    }
    rt.links.extend(new_links);
    rebuild(em, id);
}

/// Human-readable label of a face, for logs and views.
pub(super) fn face_label(em: &Emulator, node: &str, face: FaceId) -> String {
    match em.faces.get(node).and_then(|f| f.get(&face)) {
        Some(Face::Link { peer, .. }) => peer.clone(),
        Some(Face::Access { pid, .. }) => format!("participant:{pid}"),
        Some(Face::Sync { .. }) => "sync".to_string(),
        Some(Face::Agent) => "agent".to_string(),
        None => "unknown".to_string(),
    }
}
