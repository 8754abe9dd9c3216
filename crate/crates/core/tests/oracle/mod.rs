//! Reference implementations that share no code with the orchestrator: they read
//! only node and link records, and recompute everything from scratch.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slicenet::orchestrator::{AllocationMatrix, ServiceGraph, SiteSpec, SliceTemplate, VLink};
use slicenet::substrate::{CapacityLedger, Resource, Topology};

/// Residual capacity per resource, captured before an embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub compute: BTreeMap<String, u64>,
    pub storage: BTreeMap<String, u64>,
    pub bandwidth: BTreeMap<String, u64>,
}

impl Residual {
    pub fn of(topo: &Topology, ledger: &CapacityLedger) -> Residual {
        let mut r = Residual { compute: BTreeMap::new(), storage: BTreeMap::new(), bandwidth: BTreeMap::new() };
        for n in topo.nodes() {
            r.compute.insert(n.id.clone(), ledger.residual(&Resource::Compute(n.id.clone())));
            r.storage.insert(n.id.clone(), ledger.residual(&Resource::Storage(n.id.clone())));
        }
        for l in topo.links().filter(|l| l.access_type.is_none()) {
            r.bandwidth.insert(l.id.clone(), ledger.residual(&Resource::Bandwidth(l.id.clone())));
        }
        r
    }
}

struct Link {
    id: String,
    a: String,
    b: String,
    latency_us: u64,
}

fn infra(topo: &Topology) -> Vec<Link> {
    topo.links()
        .filter(|l| l.access_type.is_none())
        .map(|l| Link { id: l.id.clone(), a: l.a.clone(), b: l.b.clone(), latency_us: (l.latency_ms * 1000.0).round() as u64 })
        .collect()
}

fn adjacency(links: &[Link]) -> BTreeMap<&str, Vec<(&str, usize)>> {
    let mut adj: BTreeMap<&str, Vec<(&str, usize)>> = BTreeMap::new();
    for (i, l) in links.iter().enumerate() {
        adj.entry(&l.a).or_default().push((&l.b, i));
        adj.entry(&l.b).or_default().push((&l.a, i));
    }
    adj
}

fn budget_us(l: &VLink) -> u64 {
    (l.latency_budget_ms * 1000.0).round() as u64
}

fn storage_mb(cache_mb: f64) -> u64 {
    cache_mb.ceil() as u64
}

/// Checks an allocation against the graph and the residual capacity it was made from.
pub fn check_feasible(topo: &Topology, g: &ServiceGraph, alloc: &AllocationMatrix, before: &Residual) -> Result<(), String> {
    let links = infra(topo);
    let by_id: BTreeMap<&str, &Link> = links.iter().map(|l| (l.id.as_str(), l)).collect();

    let mapped: BTreeSet<&String> = alloc.node_map.keys().collect();
    let wanted: BTreeSet<&String> = g.vnodes.iter().map(|v| &v.vnode_id).collect();
    if mapped != wanted {
        return Err(format!("node_map covers {mapped:?}, graph has {wanted:?}"));
    }
    let mut compute: BTreeMap<&str, u64> = BTreeMap::new();
    let mut storage: BTreeMap<&str, u64> = BTreeMap::new();
    for v in &g.vnodes {
        let host = alloc.node_map[&v.vnode_id].as_str();
        if topo.node(host).is_none() {
            return Err(format!("{} mapped to unknown node {host}", v.vnode_id));
        }
        if let Some(pin) = &v.pin_hint {
            if pin != host {
                return Err(format!("{} pinned to {pin} but placed on {host}", v.vnode_id));
            }
        }
        *compute.entry(host).or_default() += v.compute_units;
        *storage.entry(host).or_default() += storage_mb(v.cache_mb);
    }
    for (n, c) in &compute {
        if *c > before.compute[*n] {
            return Err(format!("compute on {n}: {c} > residual {}", before.compute[*n]));
        }
    }
    for (n, s) in &storage {
        if *s > before.storage[*n] {
            return Err(format!("storage on {n}: {s} > residual {}", before.storage[*n]));
        }
    }

    let mut bandwidth: BTreeMap<&str, u64> = BTreeMap::new();
    for vl in &g.vlinks {
        let path = alloc.link_map.get(&vl.id).ok_or_else(|| format!("{} unmapped", vl.id))?;
        let from = alloc.node_map[&vl.a].as_str();
        let to = alloc.node_map[&vl.b].as_str();
        let mut at = from;
        let mut seen = BTreeSet::from([from]);
        let mut latency = 0;
        for id in path {
            let l = by_id.get(id.as_str()).ok_or_else(|| format!("{} uses non-infrastructure link {id}", vl.id))?;
            at = if l.a == at {
                &l.b
            } else if l.b == at {
                &l.a
            } else {
                return Err(format!("{}: link {id} does not touch {at}", vl.id));
            };
            if !seen.insert(at) {
                return Err(format!("{}: path revisits {at}", vl.id));
            }
            latency += l.latency_us;
            *bandwidth.entry(id.as_str()).or_default() += vl.bandwidth_kbps;
        }
        if at != to {
            return Err(format!("{}: path ends at {at}, not {to}", vl.id));
        }
        if latency > budget_us(vl) {
            return Err(format!("{}: {latency} us over budget {} us", vl.id, budget_us(vl)));
        }
        let reported = alloc.path_latency_ms.get(&vl.id).copied().unwrap_or(f64::NAN);
        if (reported - latency as f64 / 1000.0).abs() > 1e-9 {
            return Err(format!("{}: reported {reported} ms, path is {} ms", vl.id, latency as f64 / 1000.0));
        }
    }
    for (l, b) in &bandwidth {
        if *b > before.bandwidth[*l] {
            return Err(format!("bandwidth on {l}: {b} > residual {}", before.bandwidth[*l]));
        }
    }
    Ok(())
}

fn simple_paths(links: &[Link], adj: &BTreeMap<&str, Vec<(&str, usize)>>, from: &str, to: &str, budget: u64) -> Vec<Vec<usize>> {
    fn go<'a>(
        links: &[Link],
        adj: &BTreeMap<&'a str, Vec<(&'a str, usize)>>,
        at: &'a str,
        to: &str,
        budget: u64,
        lat: u64,
        seen: &mut Vec<&'a str>,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if at == to {
            out.push(path.clone());
            return;
        }
        for (peer, li) in adj.get(at).into_iter().flatten() {
            let l = lat + links[*li].latency_us;
            if seen.contains(peer) || l > budget {
                continue;
            }
            seen.push(peer);
            path.push(*li);
            go(links, adj, peer, to, budget, l, seen, path, out);
            path.pop();
            seen.pop();
        }
    }
    let mut out = Vec::new();
    let start = adj.keys().find(|k| **k == from).copied().unwrap_or(from);
    go(links, adj, start, to, budget, 0, &mut vec![start], &mut Vec::new(), &mut out);
    out
}

/// Whether any node map and any choice of simple paths satisfies every constraint.
pub fn exhaustive_feasible(topo: &Topology, g: &ServiceGraph, before: &Residual) -> bool {
    let links = infra(topo);
    let adj = adjacency(&links);
    let nodes: Vec<String> = topo.nodes().map(|n| n.id.clone()).collect();
    let free: Vec<usize> = (0..g.vnodes.len()).filter(|i| g.vnodes[*i].pin_hint.is_none()).collect();
    let mut choice = vec![0usize; free.len()];
    loop {
        let mut image: BTreeMap<&str, &str> = BTreeMap::new();
        for v in &g.vnodes {
            if let Some(p) = &v.pin_hint {
                image.insert(&v.vnode_id, p);
            }
        }
        for (k, i) in free.iter().enumerate() {
            image.insert(&g.vnodes[*i].vnode_id, &nodes[choice[k]]);
        }
        if nodes_fit(g, &image, before) && paths_fit(g, &image, &links, &adj, before) {
            return true;
        }
        // next combination
        let mut k = 0;
        loop {
            if k == choice.len() {
                return false;
            }
            choice[k] += 1;
            if choice[k] < nodes.len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

fn nodes_fit(g: &ServiceGraph, image: &BTreeMap<&str, &str>, before: &Residual) -> bool {
    let mut compute: BTreeMap<&str, u64> = BTreeMap::new();
    let mut storage: BTreeMap<&str, u64> = BTreeMap::new();
    for v in &g.vnodes {
        let Some(host) = image.get(v.vnode_id.as_str()) else { return false };
        *compute.entry(host).or_default() += v.compute_units;
        *storage.entry(host).or_default() += storage_mb(v.cache_mb);
    }
    compute.iter().all(|(n, c)| before.compute.get(*n).is_some_and(|r| c <= r))
        && storage.iter().all(|(n, s)| before.storage.get(*n).is_some_and(|r| s <= r))
}

fn paths_fit(
    g: &ServiceGraph,
    image: &BTreeMap<&str, &str>,
    links: &[Link],
    adj: &BTreeMap<&str, Vec<(&str, usize)>>,
    before: &Residual,
) -> bool {
    let options: Vec<(u64, Vec<Vec<usize>>)> = g
        .vlinks
        .iter()
        .map(|vl| (vl.bandwidth_kbps, simple_paths(links, adj, image[vl.a.as_str()], image[vl.b.as_str()], budget_us(vl))))
        .collect();
    if options.iter().any(|(_, p)| p.is_empty()) {
        return false;
    }
    let mut left: Vec<u64> = links.iter().map(|l| before.bandwidth[&l.id]).collect();
    fn assign(k: usize, options: &[(u64, Vec<Vec<usize>>)], left: &mut [u64]) -> bool {
        let Some((bw, paths)) = options.get(k) else { return true };
        for p in paths {
            if p.iter().all(|l| left[*l] >= *bw) {
                p.iter().for_each(|l| left[*l] -= bw);
                let ok = assign(k + 1, options, left);
                p.iter().for_each(|l| left[*l] += bw);
                if ok {
                    return true;
                }
            }
        }
        false
    }
    assign(0, &options, &mut left)
}

/// Dijkstra on link latency, in microseconds.
pub fn shortest_latency_us(topo: &Topology, from: &str, to: &str) -> Option<u64> {
    let links = infra(topo);
    let adj = adjacency(&links);
    let mut dist: BTreeMap<&str, u64> = BTreeMap::new();
    let mut heap = BinaryHeap::from([Reverse((0u64, from))]);
    while let Some(Reverse((d, n))) = heap.pop() {
        if dist.contains_key(n) {
            continue;
        }
        dist.insert(n, d);
        if n == to {
            return Some(d);
        }
        for (peer, li) in adj.get(n).into_iter().flatten() {
            if !dist.contains_key(peer) {
                heap.push(Reverse((d + links[*li].latency_us, peer)));
            }
        }
    }
    None
}

/// Lowest latency between two distinct access PoAs, in ms.
pub fn best_poa_latency_ms(topo: &Topology) -> f64 {
    let poas: Vec<_> = topo.poas().map(|p| p.id.clone()).collect();
    let mut best = u64::MAX;
    for (i, a) in poas.iter().enumerate() {
        for b in &poas[i + 1..] {
            best = best.min(shortest_latency_us(topo, a, b).unwrap_or(u64::MAX));
        }
    }
    best as f64 / 1000.0
}

/// BFS hop count over infrastructure links.
pub fn hops(topo: &Topology, from: &str, to: &str) -> Option<u32> {
    let links = infra(topo);
    let adj = adjacency(&links);
    let mut dist = BTreeMap::from([(from, 0u32)]);
    let mut q = VecDeque::from([from]);
    while let Some(n) = q.pop_front() {
        if n == to {
            return Some(dist[n]);
        }
        for (peer, _) in adj.get(n).into_iter().flatten() {
            if !dist.contains_key(peer) {
                dist.insert(peer, dist[n] + 1);
                q.push_back(peer);
            }
        }
    }
    None
}

/// Random valid template over the PoAs of `topo`.
pub fn random_template(rng: &mut ChaCha8Rng, topo: &Topology, name: &str) -> SliceTemplate {
    let mut poas: Vec<String> = topo.poas().map(|p| p.id.clone()).collect();
    let n = rng.random_range(2..=poas.len());
    let mut sites = Vec::new();
    for k in 0..n {
        let pick = rng.random_range(0..poas.len());
        sites.push(SiteSpec {
            site_id: format!("s{k}"),
            poa_node_id: poas.swap_remove(pick),
            expected_participants: rng.random_range(1..=12),
        });
    }
    SliceTemplate {
        slice_name: name.into(),
        sites,
        per_stream_kbps: [64, 250, 500, 1000, 2000, 4000, 8000][rng.random_range(0..7)],
        latency_bound_ms: rng.random_range(2..=60) as f64 / 2.0,
        mobility_enabled: rng.random_bool(0.5),
        cache_window_s: rng.random_range(1..=60) as f64,
        availability: None,
        security: None,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
