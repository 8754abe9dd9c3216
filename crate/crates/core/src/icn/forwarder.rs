//! Per-node forwarding engine. Every table is scoped to one slice.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use super::cs::ContentStore;
use super::fib::Fib;
use super::packet::{Action, Data, FaceId, Interest, Nack, NackReason, Packet, SliceId};
use super::pit::{Pit, PitEntry};
use crate::name::Name;
use crate::time::{SimDuration, SimTime};

/// Interests that have crossed this many forwarders are dropped.
pub const MAX_HOPS: u32 = 64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SliceCounters {
    pub interests_in: u64,
    pub interests_out: u64,
    pub data_in: u64,
    pub data_out: u64,
    pub cs_hits: u64,
    pub pit_aggregations: u64,
    pub drops: u64,
    pub nacks: u64,
    pub held: u64,
    pub rebinds: u64,
    pub timeouts: u64,
    pub unsolicited: u64,
    pub nacks_in: u64,
}

impl SliceCounters {
    /// interests_in = interests_out + cs_hits + pit_aggregations + drops + nacks + held
    pub fn is_conserved(&self) -> bool {
        self.interests_in
            == self.interests_out + self.cs_hits + self.pit_aggregations + self.drops + self.nacks + self.held
    }

    pub fn accumulate(&mut self, other: &SliceCounters) {
        self.interests_in += other.interests_in;
        self.interests_out += other.interests_out;
        self.data_in += other.data_in;
        self.data_out += other.data_out;
        self.cs_hits += other.cs_hits;
        self.pit_aggregations += other.pit_aggregations;
        self.drops += other.drops;
        self.nacks += other.nacks;
        self.held += other.held;
        self.rebinds += other.rebinds;
        self.timeouts += other.timeouts;
        self.unsolicited += other.unsolicited;
        self.nacks_in += other.nacks_in;
    }
}

#[derive(Debug, Clone)]
pub struct SliceTables {
    pub pit: Pit,
    pub cs: ContentStore,
    pub fib: Fib,
    pub counters: SliceCounters,
}

impl SliceTables {
    pub fn new(cache_budget_bytes: u64) -> Self {
        SliceTables {
            pit: Pit::default(),
            cs: ContentStore::new(cache_budget_bytes),
            fib: Fib::new(),
            counters: SliceCounters::default(),
        }
    }
}

/// Routing decision for an Interest that needs a new PIT entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Face(FaceId),
    /// Keep the entry without an upstream until someone rebinds it.
    Hold,
    NoRoute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterestOutcome {
    CsHit,
    Aggregated,
    Forwarded(FaceId),
    Held,
    NoRoute,
    LoopDropped,
    HopLimit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterestResult {
    pub outcome: InterestOutcome,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataResult {
    /// Downstream faces served; empty for unsolicited Data.
    pub served: Vec<FaceId>,
    pub cached: bool,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SweepResult {
    pub expired: Vec<(SliceId, PitEntry)>,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForwardError {
    /// The slice is not provisioned here; `nack` is the NACK(no-slice) to emit.
    #[error("slice {slice} is not provisioned on this forwarder")]
    UnknownSlice { slice: SliceId, nack: Action },
}

/// Default routing: longest-prefix match on the hint target (if any) or the name,
/// first next hop that is not the arrival face.
pub fn fib_route(fib: &Fib, interest: &Interest, in_face: FaceId) -> Route {
    let key = interest.hint.as_ref().map_or(&interest.name, |h| &h.target);
    match fib.longest_prefix_match(key) {
        Some(entry) => entry
            .nexthops
            .iter()
            .copied()
            .find(|f| *f != in_face)
            .map_or(Route::NoRoute, Route::Face),
        None => Route::NoRoute,
    }
}

#[derive(Debug, Clone)]
pub struct ForwarderState {
    node_id: String,
    tables: BTreeMap<SliceId, SliceTables>,
    unknown_slice_nacks: u64,
}

impl ForwarderState {
    pub fn new(node_id: impl Into<String>) -> Self {
        ForwarderState {
            node_id: node_id.into(),
            tables: BTreeMap::new(),
            unknown_slice_nacks: 0,
        }
    }

    pub fn node_id(&self) -> &str {
        &self.node_id
    }

    pub fn provision(&mut self, slice: SliceId, cache_budget_bytes: u64) {
        self.tables
            .entry(slice)
            .and_modify(|t| t.cs.set_budget(cache_budget_bytes))
            .or_insert_with(|| SliceTables::new(cache_budget_bytes));
    }

    pub fn deprovision(&mut self, slice: SliceId) -> Option<SliceTables> {
        self.tables.remove(&slice)
    }

    pub fn is_provisioned(&self, slice: SliceId) -> bool {
        self.tables.contains_key(&slice)
    }

    pub fn slices(&self) -> impl Iterator<Item = SliceId> + '_ {
        self.tables.keys().copied()
    }

    pub fn tables(&self, slice: SliceId) -> Option<&SliceTables> {
        self.tables.get(&slice)
    }

    pub fn tables_mut(&mut self, slice: SliceId) -> Option<&mut SliceTables> {
        self.tables.get_mut(&slice)
    }

    pub fn unknown_slice_nacks(&self) -> u64 {
        self.unknown_slice_nacks
    }

    pub fn on_interest(
        &mut self,
        in_face: FaceId,
        interest: Interest,
        now: SimTime,
    ) -> Result<InterestResult, ForwardError> {
        self.on_interest_with(in_face, interest, now, |fib, i| fib_route(fib, i, in_face))
    }

    /// Interest pipeline: loop check, CS, PIT aggregation, then `route` for new entries.
    pub fn on_interest_with<R>(
        &mut self,
        in_face: FaceId,
        mut interest: Interest,
        now: SimTime,
        route: R,
    ) -> Result<InterestResult, ForwardError>
    where
        R: FnOnce(&Fib, &Interest) -> Route,
    {
        let slice = interest.slice_id;
        let Some(tables) = self.tables.get_mut(&slice) else {
            self.unknown_slice_nacks += 1;
            let nack = Action {
                face: in_face,
                packet: Packet::Nack(Nack {
                    slice_id: slice,
                    name: interest.name,
                    nonce: interest.nonce,
                    reason: NackReason::NoSlice,
                }),
            };
            return Err(ForwardError::UnknownSlice { slice, nack });
        };

        // A hinted Interest coming back over one of the entry's upstream faces is a
        // late-bound re-expression (fresh nonce) passing through again; it must be forwarded.
        let backtrack = interest.hint.is_some()
            && tables
                .pit
                .get(&interest.name)
                .is_some_and(|e| e.upstream.contains(&in_face));
        if let Some(entry) = tables.pit.get(&interest.name) {
            if entry.has_nonce(interest.nonce) {
                return Ok(InterestResult {
                    outcome: InterestOutcome::LoopDropped,
                    actions: Vec::new(),
                });
            }
        }

        interest.hop_count += 1;
        let counters = &mut tables.counters;
        counters.interests_in += 1;

        if interest.hop_count > MAX_HOPS {
            counters.drops += 1;
            return Ok(InterestResult {
                outcome: InterestOutcome::HopLimit,
                actions: Vec::new(),
            });
        }

        if let Some(data) = tables.cs.lookup(&interest.name, now) {
            counters.cs_hits += 1;
            counters.data_out += 1;
            return Ok(InterestResult {
                outcome: InterestOutcome::CsHit,
                actions: vec![Action {
                    face: in_face,
                    packet: Packet::Data(data),
                }],
            });
        }

        let expiry = now + SimDuration::from_ms_u64(interest.lifetime_ms);
        if let Some(entry) = tables.pit.get_mut(&interest.name) {
            entry.downstream.insert((in_face, interest.nonce));
            entry.expiry = entry.expiry.max(expiry);
            if backtrack {
                if let Route::Face(face) = route(&tables.fib, &interest) {
                    entry.upstream.insert(face);
                    counters.interests_out += 1;
                    return Ok(InterestResult {
                        outcome: InterestOutcome::Forwarded(face),
                        actions: vec![Action {
                            face,
                            packet: Packet::Interest(interest),
                        }],
                    });
                }
            }
            counters.pit_aggregations += 1;
            return Ok(InterestResult {
                outcome: InterestOutcome::Aggregated,
                actions: Vec::new(),
            });
        }

        match route(&tables.fib, &interest) {
            Route::Face(face) => {
                counters.interests_out += 1;
                tables.pit.insert(PitEntry {
                    name: interest.name.clone(),
                    downstream: BTreeSet::from([(in_face, interest.nonce)]),
                    upstream: BTreeSet::from([face]),
                    expiry,
                    interest: interest.clone(),
                    held: false,
                });
                Ok(InterestResult {
                    outcome: InterestOutcome::Forwarded(face),
                    actions: vec![Action {
                        face,
                        packet: Packet::Interest(interest),
                    }],
                })
            }
            Route::Hold => {
                counters.held += 1;
                tables.pit.insert(PitEntry {
                    name: interest.name.clone(),
                    downstream: BTreeSet::from([(in_face, interest.nonce)]),
                    upstream: BTreeSet::new(),
                    expiry,
                    interest,
                    held: true,
                });
                Ok(InterestResult {
                    outcome: InterestOutcome::Held,
                    actions: Vec::new(),
                })
            }
            Route::NoRoute => {
                counters.nacks += 1;
                Ok(InterestResult {
                    outcome: InterestOutcome::NoRoute,
                    actions: vec![Action {
                        face: in_face,
                        packet: Packet::Nack(Nack {
                            slice_id: slice,
                            name: interest.name,
                            nonce: interest.nonce,
                            reason: NackReason::NoRoute,
                        }),
                    }],
                })
            }
        }
    }

    /// Satisfies the matching PIT entry (one copy per distinct downstream face) and caches.
    /// Unsolicited Data is dropped and not cached.
    pub fn on_data(&mut self, _in_face: FaceId, data: Data, now: SimTime) -> DataResult {
        let Some(tables) = self.tables.get_mut(&data.slice_id) else {
            return DataResult {
                served: Vec::new(),
                cached: false,
                actions: Vec::new(),
            };
        };
        tables.counters.data_in += 1;
        let Some(entry) = tables.pit.remove(&data.name) else {
            tables.counters.unsolicited += 1;
            return DataResult {
                served: Vec::new(),
                cached: false,
                actions: Vec::new(),
            };
        };
        let served: Vec<FaceId> = entry.downstream_faces().into_iter().collect();
        tables.counters.data_out += served.len() as u64;
        let actions = served
            .iter()
            .map(|face| Action {
                face: *face,
                packet: Packet::Data(data.clone()),
            })
            .collect();
        let cached = tables.cs.insert(data, now);
        DataResult {
            served,
            cached,
            actions,
        }
    }

    /// Propagates an upstream NACK to every downstream of the matching entry.
    /// Held entries and NACKs without an entry are ignored.
    pub fn on_nack(&mut self, in_face: FaceId, nack: Nack, _now: SimTime) -> Vec<Action> {
        let Some(tables) = self.tables.get_mut(&nack.slice_id) else {
            return Vec::new();
        };
        tables.counters.nacks_in += 1;
        let matches = tables
            .pit
            .get(&nack.name)
            .is_some_and(|e| !e.held && e.upstream.contains(&in_face));
        if !matches {
            return Vec::new();
        }
        let entry = tables.pit.remove(&nack.name).expect("checked above");
        entry
            .downstream
            .iter()
            .map(|(face, nonce)| Action {
                face: *face,
                packet: Packet::Nack(Nack {
                    slice_id: nack.slice_id,
                    name: nack.name.clone(),
                    nonce: *nonce,
                    reason: nack.reason,
                }),
            })
            .collect()
    }

    /// Removes every entry with expiry <= now and NACKs (timeout) its downstream faces.
    pub fn pit_sweep(&mut self, now: SimTime) -> SweepResult {
        let mut result = SweepResult::default();
        let slices: Vec<SliceId> = self.tables.keys().copied().collect();
        for slice in slices {
            let part = self.pit_sweep_slice(slice, now);
            result.expired.extend(part.expired);
            result.actions.extend(part.actions);
        }
        result
    }

    /// `pit_sweep` restricted to one slice's tables.
    pub fn pit_sweep_slice(&mut self, slice: SliceId, now: SimTime) -> SweepResult {
        self.pit_sweep_where(slice, now, |_| true)
    }

    /// Sweeps only the entries of `slice` whose name satisfies `keep`. The control
    /// slice uses this to expire one subject slice's signalling at a time.
    pub fn pit_sweep_where(&mut self, slice: SliceId, now: SimTime, keep: impl Fn(&Name) -> bool) -> SweepResult {
        let mut result = SweepResult::default();
        let Some(tables) = self.tables.get_mut(&slice) else {
            return result;
        };
        for entry in tables.pit.drain_expired_where(now, keep) {
            tables.counters.timeouts += 1;
            for (face, nonce) in &entry.downstream {
                result.actions.push(Action {
                    face: *face,
                    packet: Packet::Nack(Nack {
                        slice_id: slice,
                        name: entry.name.clone(),
                        nonce: *nonce,
                        reason: NackReason::Timeout,
                    }),
                });
            }
            result.expired.push((slice, entry));
        }
        result
    }

    pub fn next_expiry(&self) -> Option<SimTime> {
        self.tables.values().filter_map(|t| t.pit.next_expiry()).min()
    }

    /// Parks entries under `prefix` whose upstream includes `face`; returns their names.
    /// Used when a producer detaches with mobility enabled.
    pub fn hold_pending(&mut self, slice: SliceId, prefix: &Name, face: FaceId, until: SimTime) -> Vec<Name> {
        let Some(tables) = self.tables.get_mut(&slice) else {
            return Vec::new();
        };
        let mut parked = Vec::new();
        for entry in tables.pit.iter_mut() {
            if !entry.held && prefix.is_prefix_of(&entry.name) && entry.upstream.contains(&face) {
                entry.upstream.clear();
                entry.held = true;
                entry.expiry = entry.expiry.max(until);
                parked.push(entry.name.clone());
            }
        }
        parked
    }

    /// Names of entries under `prefix` that are waiting on `face`.
    pub fn pending_on(&self, slice: SliceId, prefix: &Name, face: FaceId) -> Vec<Name> {
        self.tables
            .get(&slice)
            .map(|t| {
                t.pit
                    .iter()
                    .filter(|e| prefix.is_prefix_of(&e.name) && e.upstream.contains(&face))
                    .map(|e| e.name.clone())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Held entries under `prefix`.
    pub fn held_under(&self, slice: SliceId, prefix: &Name) -> Vec<Name> {
        self.tables
            .get(&slice)
            .map(|t| {
                t.pit
                    .iter()
                    .filter(|e| e.held && prefix.is_prefix_of(&e.name))
                    .map(|e| e.name.clone())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Binds a held entry to `upstream`, refreshing its lifetime. Returns the Interest
    /// to re-express (the caller decides on hints), or `None` if the entry is gone.
    pub fn rebind(&mut self, slice: SliceId, name: &Name, upstream: FaceId, now: SimTime) -> Option<Interest> {
        let tables = self.tables.get_mut(&slice)?;
        let entry = tables.pit.get_mut(name)?;
        if !entry.held {
            return None;
        }
        entry.held = false;
        entry.upstream.insert(upstream);
        entry.expiry = entry
            .expiry
            .max(now + SimDuration::from_ms_u64(entry.interest.lifetime_ms));
        tables.counters.rebinds += 1;
        Some(entry.interest.clone())
    }
}
