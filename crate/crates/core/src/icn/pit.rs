use std::collections::{BTreeMap, BTreeSet};

use super::packet::{FaceId, Interest};
use crate::name::Name;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PitEntry {
    pub name: Name,
    /// (face, nonce) pairs. Nonces are pairwise distinct.
    pub downstream: BTreeSet<(FaceId, u64)>,
    pub upstream: BTreeSet<FaceId>,
    pub expiry: SimTime,
    /// First Interest that created the entry; re-expressed on late binding.
    pub interest: Interest,
    /// Parked at a PoA whose producer is detached; waiting for a new binding.
    pub held: bool,
}

impl PitEntry {
    pub fn has_nonce(&self, nonce: u64) -> bool {
        self.downstream.iter().any(|(_, n)| *n == nonce)
    }

    pub fn downstream_faces(&self) -> BTreeSet<FaceId> {
        self.downstream.iter().map(|(f, _)| *f).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Pit {
    entries: BTreeMap<Name, PitEntry>,
}

impl Pit {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &Name) -> Option<&PitEntry> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &Name) -> Option<&mut PitEntry> {
        self.entries.get_mut(name)
    }

    pub fn insert(&mut self, entry: PitEntry) {
        debug_assert!(!entry.downstream.is_empty());
        self.entries.insert(entry.name.clone(), entry);
    }

    pub fn remove(&mut self, name: &Name) -> Option<PitEntry> {
        self.entries.remove(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PitEntry> {
        self.entries.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut PitEntry> {
        self.entries.values_mut()
    }

    /// Removes and returns every entry with `expiry <= now`.
    pub fn drain_expired(&mut self, now: SimTime) -> Vec<PitEntry> {
        self.drain_expired_where(now, |_| true)
    }

    /// `drain_expired` restricted to names accepted by `keep`.
    pub fn drain_expired_where(&mut self, now: SimTime, keep: impl Fn(&Name) -> bool) -> Vec<PitEntry> {
        let expired: Vec<Name> = self
            .entries
            .values()
            .filter(|e| e.expiry <= now && keep(&e.name))
            .map(|e| e.name.clone())
            .collect();
        expired
            .into_iter()
            .filter_map(|n| self.entries.remove(&n))
            .collect()
    }

    pub fn next_expiry(&self) -> Option<SimTime> {
        self.entries.values().map(|e| e.expiry).min()
    }
}
