//! Name-prefix routing table, stored as a component trie.

use std::collections::BTreeMap;

use serde::Serialize;

use super::packet::FaceId;
use crate::name::Name;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FibEntry {
    pub prefix: Name,
    /// Next hops in priority order.
    pub nexthops: Vec<FaceId>,
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: BTreeMap<String, TrieNode>,
    entry: Option<FibEntry>,
}

impl TrieNode {
    fn is_vacant(&self) -> bool {
        self.entry.is_none() && self.children.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Fib {
    root: TrieNode,
    len: usize,
}

impl Fib {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Installs or replaces the entry for `prefix`. An empty next-hop list removes it.
    pub fn insert(&mut self, prefix: Name, nexthops: Vec<FaceId>) {
        if nexthops.is_empty() {
            self.remove(&prefix);
            return;
        }
        let mut node = &mut self.root;
        for c in prefix.components() {
            node = node.children.entry(c.clone()).or_default();
        }
        if node.entry.is_none() {
            self.len += 1;
        }
        node.entry = Some(FibEntry { prefix, nexthops });
    }

    pub fn remove(&mut self, prefix: &Name) -> Option<FibEntry> {
        fn go(node: &mut TrieNode, comps: &[String]) -> Option<FibEntry> {
            match comps.split_first() {
                None => node.entry.take(),
                Some((head, rest)) => {
                    let child = node.children.get_mut(head)?;
                    let removed = go(child, rest);
                    if child.is_vacant() {
                        node.children.remove(head);
                    }
                    removed
                }
            }
        }
        let removed = go(&mut self.root, prefix.components());
        if removed.is_some() {
            self.len -= 1;
        }
        removed
    }

    pub fn get(&self, prefix: &Name) -> Option<&FibEntry> {
        let mut node = &self.root;
        for c in prefix.components() {
            node = node.children.get(c)?;
        }
        node.entry.as_ref()
    }

    pub fn longest_prefix_match(&self, name: &Name) -> Option<&FibEntry> {
        let mut node = &self.root;
        let mut best = node.entry.as_ref();
        for c in name.components() {
            match node.children.get(c) {
                Some(child) => {
                    node = child;
                    if node.entry.is_some() {
                        best = node.entry.as_ref();
                    }
                }
                None => break,
            }
        }
        best
    }

    /// Entries in prefix order.
    pub fn entries(&self) -> Vec<&FibEntry> {
        fn walk<'a>(node: &'a TrieNode, out: &mut Vec<&'a FibEntry>) {
            if let Some(e) = &node.entry {
                out.push(e);
            }
            for child in node.children.values() {
                walk(child, out);
            }
        }
        let mut out = Vec::with_capacity(self.len);
        walk(&self.root, &mut out);
        out
    }

    /// Drops `face` from every entry, removing entries left without next hops.
    pub fn remove_face(&mut self, face: FaceId) {
        let affected: Vec<Name> = self
            .entries()
            .into_iter()
            .filter(|e| e.nexthops.contains(&face))
            .map(|e| e.prefix.clone())
            .collect();
        for prefix in affected {
            let mut hops = self.get(&prefix).map(|e| e.nexthops.clone()).unwrap_or_default();
            hops.retain(|f| *f != face);
            self.insert(prefix, hops);
        }
    }
}
