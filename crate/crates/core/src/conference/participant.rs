//! Per-participant producer and consumer state.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::sync::RosterSnapshot;
use super::ConferenceError;
use crate::name::Name;
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Producer,
    Consumer,
}

impl std::ops::AddAssign for ParticipantStats {
    fn add_assign(&mut self, o: Self) {
        self.published += o.published;
        self.served += o.served;
        self.delivered += o.delivered;
        self.latency_sum_us += o.latency_sum_us;
        self.retries += o.retries;
        self.abandoned += o.abandoned;
    }
}

pub const DEFAULT_PAYLOAD_BYTES: u64 = 1200;
pub const MAX_RETRIES: u32 = 3;

/// One media Interest the consumer is waiting on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outstanding {
    pub producer: String,
    pub seq: u64,
    pub nonce: u64,
    pub attempt: u32,
    pub lifetime_ms: u64,
    /// First expression; latency is measured from here across retries.
    pub first_sent: SimTime,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ParticipantStats {
    pub published: u64,
    pub served: u64,
    pub delivered: u64,
    pub latency_sum_us: u64,
    pub retries: u64,
    pub abandoned: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeoutAction {
    Retry { lifetime_ms: u64 },
    GiveUp,
}

#[derive(Debug, Clone)]
pub struct Participant {
    pub id: String,
    pub roles: BTreeSet<Role>,
    next_seq: u64,
    segments: BTreeMap<u64, u64>,
    known_version: u64,
    /// Next sequence to request, per producer.
    cursors: BTreeMap<String, u64>,
    outstanding: BTreeMap<Name, Outstanding>,
    pub stats: ParticipantStats,
}

impl Participant {
    pub fn new(id: &str, roles: BTreeSet<Role>) -> Self {
        Participant {
            id: id.to_string(),
            roles,
            next_seq: 0,
            segments: BTreeMap::new(),
            known_version: 0,
            cursors: BTreeMap::new(),
            outstanding: BTreeMap::new(),
            stats: ParticipantStats::default(),
        }
    }

    pub fn both_roles() -> BTreeSet<Role> {
        BTreeSet::from([Role::Producer, Role::Consumer])
    }

    pub fn is_producer(&self) -> bool {
        self.roles.contains(&Role::Producer)
    }

    pub fn is_consumer(&self) -> bool {
        self.roles.contains(&Role::Consumer)
    }

    pub fn known_version(&self) -> u64 {
        self.known_version
    }

    pub fn latest_seq(&self) -> Option<u64> {
        self.next_seq.checked_sub(1)
    }

    /// Stores the next segment and returns its sequence number.
    pub fn publish(&mut self, payload_bytes: u64) -> Result<u64, ConferenceError> {
        if !self.is_producer() {
            return Err(ConferenceError::NotProducer(self.id.clone()));
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.segments.insert(seq, payload_bytes);
        self.stats.published += 1;
        Ok(seq)
    }

    /// Payload size of a stored segment; counts as one serve.
    pub fn serve(&mut self, seq: u64) -> Option<u64> {
        let len = *self.segments.get(&seq)?;
        self.stats.served += 1;
        Some(len)
    }

    /// Applies a roster and returns the (producer, seq) pairs to fetch, in order.
    /// Each pair is returned at most once over the participant's lifetime.
    pub fn on_roster(&mut self, snap: &RosterSnapshot) -> Vec<(String, u64)> {
        if snap.version <= self.known_version {
            return Vec::new();
        }
        self.known_version = snap.version;
        self.cursors.retain(|q, _| snap.roster.contains_key(q));
        if !self.is_consumer() {
            return Vec::new();
        }
        let mut fetch = Vec::new();
        for (q, latest) in &snap.roster {
            if *q == self.id || *latest < 0 {
                continue;
            }
            let cursor = self.cursors.entry(q.clone()).or_insert(0);
            let latest = *latest as u64;
            for seq in *cursor..=latest {
                fetch.push((q.clone(), seq));
            }
            *cursor = (*cursor).max(latest + 1);
        }
        fetch
    }

    pub fn track(&mut self, name: Name, producer: &str, seq: u64, nonce: u64, lifetime_ms: u64, now: SimTime) {
        self.outstanding.insert(
            name,
            Outstanding {
                producer: producer.to_string(),
                seq,
                nonce,
                attempt: 0,
                lifetime_ms,
                first_sent: now,
            },
        );
    }

    pub fn outstanding(&self) -> &BTreeMap<Name, Outstanding> {
        &self.outstanding
    }

    pub fn pending(&self, name: &Name) -> Option<&Outstanding> {
        self.outstanding.get(name)
    }

    /// Records a media arrival. Returns the delivery latency in microseconds,
    /// or None for Data nobody is waiting on.
    pub fn on_data(&mut self, name: &Name, now: SimTime) -> Option<u64> {
        let o = self.outstanding.remove(name)?;
        let latency = now.saturating_sub(o.first_sent).0;
        self.stats.delivered += 1;
        self.stats.latency_sum_us += latency;
        Some(latency)
    }

    /// Handles a timeout for the expression carrying `nonce`. Stale nonces are ignored.
    pub fn on_timeout(&mut self, name: &Name, nonce: u64) -> Option<TimeoutAction> {
        let o = self.outstanding.get_mut(name)?;
        if o.nonce != nonce {
            return None;
        }
        if o.attempt >= MAX_RETRIES {
            self.outstanding.remove(name);
            self.stats.abandoned += 1;
            return Some(TimeoutAction::GiveUp);
        }
        o.attempt += 1;
        o.lifetime_ms *= 2;
        self.stats.retries += 1;
        Some(TimeoutAction::Retry {
            lifetime_ms: o.lifetime_ms,
        })
    }

    /// Records the nonce of a re-expression.
    pub fn reexpressed(&mut self, name: &Name, nonce: u64) {
        if let Some(o) = self.outstanding.get_mut(name) {
            o.nonce = nonce;
        }
    }

    pub fn mean_latency_us(&self) -> Option<f64> {
        (self.stats.delivered > 0).then(|| self.stats.latency_sum_us as f64 / self.stats.delivered as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conference::names;

    fn roster(version: u64, entries: &[(&str, i64)]) -> RosterSnapshot {
        RosterSnapshot {
            version,
            roster: entries.iter().map(|(p, s)| (p.to_string(), *s)).collect(),
        }
    }

    #[test]
    fn consumer_only_cannot_publish() {
        let mut p = Participant::new("c", BTreeSet::from([Role::Consumer]));
        assert!(matches!(p.publish(10), Err(ConferenceError::NotProducer(_))));
    }

    #[test]
    fn publish_numbers_from_zero() {
        let mut p = Participant::new("a", Participant::both_roles());
        assert_eq!(p.publish(100).unwrap(), 0);
        assert_eq!(p.publish(100).unwrap(), 1);
        assert_eq!(p.latest_seq(), Some(1));
        assert_eq!(p.serve(1), Some(100));
        assert_eq!(p.serve(2), None);
        assert_eq!(p.stats.served, 1);
    }

    #[test]
    fn roster_fetches_each_segment_once() {
        let mut p = Participant::new("a", Participant::both_roles());
        let f = p.on_roster(&roster(3, &[("a", 5), ("b", 1), ("c", -1)]));
        assert_eq!(f, vec![("b".to_string(), 0), ("b".to_string(), 1)]);
        // a stale or repeated roster fetches nothing
        assert!(p.on_roster(&roster(3, &[("b", 4)])).is_empty());
        let f = p.on_roster(&roster(4, &[("b", 3), ("c", 0)]));
        assert_eq!(f, vec![("b".into(), 2), ("b".into(), 3), ("c".into(), 0)]);
    }

    #[test]
    fn producer_only_fetches_nothing() {
        let mut p = Participant::new("a", BTreeSet::from([Role::Producer]));
        assert!(p.on_roster(&roster(1, &[("b", 3)])).is_empty());
        assert_eq!(p.known_version(), 1);
    }

    #[test]
    fn retries_double_then_give_up() {
        let mut p = Participant::new("a", Participant::both_roles());
        let n = names::media("s", "b", 0);
        p.track(n.clone(), "b", 0, 1, 100, SimTime::ZERO);
        assert_eq!(p.on_timeout(&n, 99), None);
        assert_eq!(p.on_timeout(&n, 1), Some(TimeoutAction::Retry { lifetime_ms: 200 }));
        p.reexpressed(&n, 2);
        assert_eq!(p.on_timeout(&n, 2), Some(TimeoutAction::Retry { lifetime_ms: 400 }));
        p.reexpressed(&n, 3);
        assert_eq!(p.on_timeout(&n, 3), Some(TimeoutAction::Retry { lifetime_ms: 800 }));
        p.reexpressed(&n, 4);
        assert_eq!(p.on_timeout(&n, 4), Some(TimeoutAction::GiveUp));
        assert!(p.pending(&n).is_none());
        assert_eq!(p.stats.abandoned, 1);
    }

    #[test]
    fn latency_spans_retries() {
        let mut p = Participant::new("a", Participant::both_roles());
        let n = names::media("s", "b", 0);
        p.track(n.clone(), "b", 0, 1, 100, SimTime(1000));
        p.on_timeout(&n, 1);
        assert_eq!(p.on_data(&n, SimTime(5000)), Some(4000));
        assert_eq!(p.on_data(&n, SimTime(6000)), None);
        assert_eq!(p.mean_latency_us(), Some(4000.0));
    }
}
