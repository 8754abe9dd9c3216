//! Splits a service graph into per-domain subgraphs.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use super::graph::{ServiceGraph, VLink, VNode};
use crate::substrate::Topology;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subgraph {
    pub domain_id: String,
    pub vnodes: Vec<VNode>,
    /// Vlinks with both endpoints in this domain.
    pub vlinks: Vec<VLink>,
    /// Cut vlinks; each one also appears in the subgraph on the other side.
    pub stubs: Vec<VLink>,
}

impl Subgraph {
    pub fn contains(&self, vnode_id: &str) -> bool {
        self.vnodes.iter().any(|v| v.vnode_id == vnode_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("pin_hint {pin} of vnode {vnode} is not a substrate node")]
pub struct UnknownPin {
    pub vnode: String,
    pub pin: String,
}

/// Domain of every vnode: pinned vnodes take their pin's domain; unpinned ones join
/// the domain hosting most adjacent pinned vnodes, ties to the lowest domain id.
pub fn assign_domains(g: &ServiceGraph, topo: &Topology) -> Result<BTreeMap<String, String>, UnknownPin> {
    let mut domain = BTreeMap::new();
    for v in &g.vnodes {
        if let Some(pin) = &v.pin_hint {
            let node = topo.node(pin).ok_or_else(|| UnknownPin {
                vnode: v.vnode_id.clone(),
                pin: pin.clone(),
            })?;
            domain.insert(v.vnode_id.clone(), node.domain.clone());
        }
    }
    let fallback = topo.domains().into_iter().next().unwrap_or_default();
    for v in g.vnodes.iter().filter(|v| v.pin_hint.is_none()) {
        let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
        for n in g.neighbors(&v.vnode_id) {
            let pinned = g.vnode(n).is_some_and(|x| x.pin_hint.is_some());
            if let (true, Some(d)) = (pinned, domain.get(n)) {
                *votes.entry(d.as_str()).or_default() += 1;
            }
        }
        // max_by_key keeps the last maximum; iterating in reverse makes that the lowest domain id.
        let chosen = votes
            .iter()
            .rev()
            .max_by_key(|(_, c)| **c)
            .map(|(d, _)| d.to_string())
            .unwrap_or_else(|| fallback.clone());
        domain.insert(v.vnode_id.clone(), chosen);
    }
    Ok(domain)
}

pub fn partition(g: &ServiceGraph, topo: &Topology) -> Result<Vec<Subgraph>, UnknownPin> {
    let domain = assign_domains(g, topo)?;
    let mut subs: BTreeMap<String, Subgraph> = BTreeMap::new();
    for v in &g.vnodes {
        let d = &domain[&v.vnode_id];
        subs.entry(d.clone())
            .or_insert_with(|| Subgraph {
                domain_id: d.clone(),
                vnodes: Vec::new(),
                vlinks: Vec::new(),
                stubs: Vec::new(),
            })
            .vnodes
            .push(v.clone());
    }
    for l in &g.vlinks {
        let (da, db) = (&domain[&l.a], &domain[&l.b]);
        if da == db {
            subs.get_mut(da).unwrap().vlinks.push(l.clone());
        } else {
            subs.get_mut(da).unwrap().stubs.push(l.clone());
            subs.get_mut(db).unwrap().stubs.push(l.clone());
        }
    }
    Ok(subs.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::orchestrator::graph::{build_service_graph, VNodeKind, SYNC_VNODE};
    use std::collections::BTreeSet;

    fn ids(vs: &[VNode]) -> BTreeSet<String> {
        vs.iter().map(|v| v.vnode_id.clone()).collect()
    }

    #[test]
    fn single_domain_is_identity() {
        let topo = fixtures::line_topology();
        let t = fixtures::line_template("line");
        let g = build_service_graph(&t).unwrap();
        let subs = partition(&g, &topo).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].vnodes, g.vnodes);
        assert_eq!(subs[0].vlinks, g.vlinks);
        assert!(subs[0].stubs.is_empty());
    }

    #[test]
    fn tie_goes_to_lowest_domain() {
        let topo = fixtures::demo_topology();
        let g = build_service_graph(&fixtures::demo_template("blue", 3, 3)).unwrap();
        let d = assign_domains(&g, &topo).unwrap();
        assert_eq!(d["fwd-a"], "A");
        assert_eq!(d["fwd-b"], "B");
        assert_eq!(d[SYNC_VNODE], "A");
    }

    #[test]
    fn forced_pin_splits_and_duplicates_cut_links() {
        let topo = fixtures::demo_topology();
        let mut g = build_service_graph(&fixtures::demo_template("blue", 3, 3)).unwrap();
        g.vnodes.iter_mut().find(|v| v.kind == VNodeKind::ServiceFunction).unwrap().pin_hint = Some("edge1".into());
        let subs = partition(&g, &topo).unwrap();
        let domains: Vec<&str> = subs.iter().map(|s| s.domain_id.as_str()).collect();
        assert_eq!(domains, ["A", "B"]);
        // vnode sets partition the graph
        let union: BTreeSet<String> = subs.iter().flat_map(|s| ids(&s.vnodes)).collect();
        assert_eq!(union, ids(&g.vnodes));
        assert!(ids(&subs[0].vnodes).is_disjoint(&ids(&subs[1].vnodes)));
        // cut vlinks show up on both sides; internal ones on exactly one
        let cut: BTreeSet<&str> = ["fwd-a--fwd-b", "fwd-b--sync"].into();
        for s in &subs {
            let stubs: BTreeSet<&str> = s.stubs.iter().map(|l| l.id.as_str()).collect();
            assert_eq!(stubs, cut);
        }
        let internal: Vec<&str> = subs.iter().flat_map(|s| s.vlinks.iter().map(|l| l.id.as_str())).collect();
        assert_eq!(internal, ["fwd-a--sync"]);
    }

    #[test]
    fn unknown_pin_rejected() {
        let topo = fixtures::demo_topology();
        let mut g = build_service_graph(&fixtures::demo_template("blue", 1, 1)).unwrap();
        g.vnodes[0].pin_hint = Some("nowhere".into());
        assert!(partition(&g, &topo).is_err());
    }
}
