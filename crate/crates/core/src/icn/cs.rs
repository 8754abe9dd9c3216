//! Byte-bounded content store with LRU eviction on last hit.

use std::collections::BTreeMap;

use super::packet::Data;
use crate::name::Name;
use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsEntry {
    pub data: Data,
    pub inserted_at: SimTime,
    pub last_hit: SimTime,
    // Monotonic recency stamp; breaks ties between equal `last_hit` times.
    stamp: u64,
}

impl CsEntry {
    fn is_fresh(&self, now: SimTime) -> bool {
        now < self.inserted_at + SimDuration::from_ms_u64(self.data.freshness_ms)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ContentStore {
    budget_bytes: u64,
    used_bytes: u64,
    entries: BTreeMap<Name, CsEntry>,
    // (last_hit, stamp) -> name, oldest first.
    recency: BTreeMap<(SimTime, u64), Name>,
    next_stamp: u64,
    evictions: u64,
}

impl ContentStore {
    pub fn new(budget_bytes: u64) -> Self {
        ContentStore {
            budget_bytes,
            ..Default::default()
        }
    }

    pub fn budget_bytes(&self) -> u64 {
        self.budget_bytes
    }

    pub fn used_bytes(&self) -> u64 {
        self.used_bytes
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    pub fn contains(&self, name: &Name) -> bool {
        self.entries.contains_key(name)
    }

    /// Shrinks or grows the budget, evicting LRU entries if needed.
    pub fn set_budget(&mut self, budget_bytes: u64) {
        self.budget_bytes = budget_bytes;
        self.evict_to(budget_bytes);
    }

    /// Returns a fresh copy of the Data and refreshes its recency. Stale entries are dropped.
    pub fn lookup(&mut self, name: &Name, now: SimTime) -> Option<Data> {
        let fresh = self.entries.get(name)?.is_fresh(now);
        if !fresh {
            self.remove(name);
            return None;
        }
        let stamp = self.bump();
        let entry = self.entries.get_mut(name)?;
        self.recency.remove(&(entry.last_hit, entry.stamp));
        entry.last_hit = now;
        entry.stamp = stamp;
        self.recency.insert((now, stamp), name.clone());
        Some(entry.data.clone())
    }

    /// Inserts, evicting least-recently-hit entries until the new one fits.
    /// Data larger than the whole budget is not cached.
    pub fn insert(&mut self, data: Data, now: SimTime) -> bool {
        let size = data.stored_len();
        if size > self.budget_bytes {
            return false;
        }
        self.remove(&data.name);
        self.evict_to(self.budget_bytes - size);
        let stamp = self.bump();
        let name = data.name.clone();
        self.recency.insert((now, stamp), name.clone());
        self.entries.insert(
            name,
            CsEntry {
                data,
                inserted_at: now,
                last_hit: now,
                stamp,
            },
        );
        self.used_bytes += size;
        debug_assert!(self.used_bytes <= self.budget_bytes);
        true
    }

    pub fn remove(&mut self, name: &Name) -> Option<CsEntry> {
        let entry = self.entries.remove(name)?;
        self.recency.remove(&(entry.last_hit, entry.stamp));
        self.used_bytes -= entry.data.stored_len();
        Some(entry)
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.recency.clear();
        self.used_bytes = 0;
    }

    /// Names from least to most recently hit.
    pub fn lru_order(&self) -> Vec<Name> {
        self.recency.values().cloned().collect()
    }

    fn evict_to(&mut self, target: u64) {
        while self.used_bytes > target {
            let Some((_, victim)) = self.recency.pop_first() else {
                break;
            };
            if let Some(entry) = self.entries.remove(&victim) {
                self.used_bytes -= entry.data.stored_len();
                self.evictions += 1;
            }
        }
    }

    fn bump(&mut self) -> u64 {
        self.next_stamp += 1;
        self.next_stamp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::icn::packet::SliceId;
    use proptest::prelude::*;

    fn data(name: &str, len: u64) -> Data {
        Data::synthetic(SliceId(1), Name::parse(name).unwrap(), len, 10_000)
    }

    fn t(ms: u64) -> SimTime {
        SimTime(ms * 1000)
    }

    #[test]
    fn evicts_least_recently_hit() {
        let a = data("/x/a", 100);
        let per = a.stored_len();
        let mut cs = ContentStore::new(2 * per);
        cs.insert(a, t(0));
        cs.insert(data("/x/b", 100), t(1));
        // hit a so b becomes the LRU victim
        assert!(cs.lookup(&Name::parse("/x/a").unwrap(), t(2)).is_some());
        cs.insert(data("/x/c", 100), t(3));
        assert_eq!(cs.len(), 2);
        assert!(cs.contains(&Name::parse("/x/a").unwrap()));
        assert!(!cs.contains(&Name::parse("/x/b").unwrap()));
        assert!(cs.used_bytes() <= cs.budget_bytes());
        assert_eq!(cs.evictions(), 1);
    }

    #[test]
    fn stale_entries_miss() {
        let mut cs = ContentStore::new(10_000);
        let mut d = data("/x/a", 10);
        d.freshness_ms = 5;
        cs.insert(d, t(0));
        assert!(cs.lookup(&Name::parse("/x/a").unwrap(), t(4)).is_some());
        assert!(cs.lookup(&Name::parse("/x/a").unwrap(), t(5)).is_none());
        assert!(cs.is_empty());
        assert_eq!(cs.used_bytes(), 0);
    }

    #[test]
    fn zero_budget_caches_nothing() {
        let mut cs = ContentStore::new(0);
        assert!(!cs.insert(data("/x/a", 1), t(0)));
        assert!(cs.is_empty());
    }

    #[derive(Debug, Clone)]
    enum Op {
        Insert(u8, u64),
        Hit(u8),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0u8..6, 1u64..400).prop_map(|(k, len)| Op::Insert(k, len)),
            (0u8..6).prop_map(Op::Hit),
        ]
    }

    proptest! {
        // Reference model: a plain list ordered by recency, evicting from the front.
        #[test]
        fn matches_reference_lru(ops in prop::collection::vec(op(), 1..60), budget in 0u64..1500) {
            let mut cs = ContentStore::new(budget);
            let mut model: Vec<(Name, u64)> = Vec::new();
            for (step, op) in ops.into_iter().enumerate() {
                let now = t(step as u64);
                match op {
                    Op::Insert(k, len) => {
                        let d = data(&format!("/k/{k}"), len);
                        let size = d.stored_len();
                        let name = d.name.clone();
                        cs.insert(d, now);
                        if size <= budget {
                            model.retain(|(n, _)| *n != name);
                            while model.iter().map(|(_, s)| s).sum::<u64>() + size > budget {
                                model.remove(0);
                            }
                            model.push((name, size));
                        }
                    }
                    Op::Hit(k) => {
                        let name = Name::parse(&format!("/k/{k}")).unwrap();
                        let hit = cs.lookup(&name, now).is_some();
                        let pos = model.iter().position(|(n, _)| *n == name);
                        prop_assert_eq!(hit, pos.is_some());
                        if let Some(p) = pos {
                            let e = model.remove(p);
                            model.push(e);
                        }
                    }
                }
                prop_assert!(cs.used_bytes() <= budget);
                let expected: Vec<Name> = model.iter().map(|(n, _)| n.clone()).collect();
                prop_assert_eq!(cs.lru_order(), expected);
            }
        }
    }
}
