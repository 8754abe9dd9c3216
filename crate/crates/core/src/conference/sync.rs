//! Versioned roster with long-poll reads.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{names, ConferenceError};
use crate::icn::{Data, SliceId};
use crate::name::Name;
use crate::time::{SimDuration, SimTime};

/// Sync replies must not be served from caches for long.
pub const SYNC_FRESHNESS_MS: u64 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterSnapshot {
    pub version: u64,
    /// participant -> latest published sequence, -1 before the first publish
    pub roster: BTreeMap<String, i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SyncState {
    roster: BTreeMap<String, i64>,
    version: u64,
}

impl SyncState {
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn latest(&self, participant: &str) -> Option<i64> {
        self.roster.get(participant).copied()
    }

    pub fn snapshot(&self) -> RosterSnapshot {
        RosterSnapshot {
            version: self.version,
            roster: self.roster.clone(),
        }
    }

    pub fn join(&mut self, participant: &str) -> Result<u64, ConferenceError> {
        if self.roster.contains_key(participant) {
            return Err(ConferenceError::DuplicateParticipant(participant.to_string()));
        }
        self.roster.insert(participant.to_string(), -1);
        self.version += 1;
        Ok(self.version)
    }

    pub fn leave(&mut self, participant: &str) -> Result<u64, ConferenceError> {
        if self.roster.remove(participant).is_none() {
            return Err(ConferenceError::UnknownParticipant(participant.to_string()));
        }
        self.version += 1;
        Ok(self.version)
    }

    /// Records a publish. Returns false (no version bump) for unknown participants
    /// and for sequences not newer than the current one.
    pub fn update(&mut self, participant: &str, seq: u64) -> bool {
        match self.roster.get_mut(participant) {
            Some(latest) if (seq as i64) > *latest => {
                *latest = seq as i64;
                self.version += 1;
                true
            }
            _ => false,
        }
    }
}

/// What the sync function does with an incoming Interest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SyncReply {
    /// Answer now.
    Data(Data),
    /// Long-poll: keep pending until the roster changes.
    Pending,
    Ignore,
}

/// The sync service function hosted on one substrate node of the slice.
#[derive(Debug, Clone)]
pub struct SyncService {
    slice: SliceId,
    slice_name: String,
    pub state: SyncState,
    // known version -> latest expiry among polls for it
    pending: BTreeMap<u64, SimTime>,
}

impl SyncService {
    pub fn new(slice: SliceId, slice_name: &str) -> Self {
        SyncService {
            slice,
            slice_name: slice_name.to_string(),
            state: SyncState::default(),
            pending: BTreeMap::new(),
        }
    }

    pub fn pending_polls(&self) -> usize {
        self.pending.len()
    }

    fn state_data(&self, known: u64) -> Data {
        let payload = serde_json::to_vec(&self.state.snapshot()).expect("roster serializes");
        Data::new(
            self.slice,
            names::sync_state(&self.slice_name, known),
            payload,
            SYNC_FRESHNESS_MS,
        )
    }

    pub fn on_interest(&mut self, name: &Name, lifetime_ms: u64, now: SimTime) -> SyncReply {
        match names::parse_sync(&self.slice_name, name) {
            Some(names::SyncName::State(known)) => {
                if self.state.version() > known {
                    SyncReply::Data(self.state_data(known))
                } else {
                    let expiry = now + SimDuration::from_ms_u64(lifetime_ms);
                    let slot = self.pending.entry(known).or_insert(expiry);
                    *slot = (*slot).max(expiry);
                    SyncReply::Pending
                }
            }
            Some(names::SyncName::Update(participant, seq)) => {
                self.state.update(&participant, seq);
                SyncReply::Data(Data::new(self.slice, name.clone(), Vec::new(), SYNC_FRESHNESS_MS))
            }
            None => SyncReply::Ignore,
        }
    }

    /// Answers every live poll older than the current version.
    pub fn flush(&mut self, now: SimTime) -> Vec<Data> {
        let version = self.state.version();
        self.pending.retain(|_, expiry| *expiry > now);
        let ready: Vec<u64> = self.pending.range(..version).map(|(v, _)| *v).collect();
        ready
            .into_iter()
            .map(|v| {
                self.pending.remove(&v);
                self.state_data(v)
            })
            .collect()
    }
}
