//! Capacity accounting for node compute, node storage and link bandwidth.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::topology::Topology;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum Resource {
    /// Compute units on a node.
    Compute(String),
    /// Storage in MB on a node.
    Storage(String),
    /// Bandwidth in kbps on an inter-node link.
    Bandwidth(String),
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resource::Compute(n) => write!(f, "compute@{n}"),
            Resource::Storage(n) => write!(f, "storage@{n}"),
            Resource::Bandwidth(l) => write!(f, "bandwidth@{l}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ReservationId(pub u64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("insufficient capacity on {resource}: requested {requested}, available {available}")]
    InsufficientCapacity {
        resource: Resource,
        requested: u64,
        available: u64,
    },
    #[error("reservation amount must be positive")]
    InvalidAmount,
    #[error("unknown resource {0}")]
    UnknownResource(Resource),
    #[error("unknown reservation {0:?}")]
    UnknownReservation(ReservationId),
}

/// Used amounts per resource kind, keyed by node or link id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LedgerSnapshot {
    pub compute: BTreeMap<String, u64>,
    pub storage_mb: BTreeMap<String, u64>,
    pub bandwidth_kbps: BTreeMap<String, u64>,
    pub reservations: usize,
}

#[derive(Debug, Clone)]
pub struct CapacityLedger {
    capacity: BTreeMap<Resource, u64>,
    used: BTreeMap<Resource, u64>,
    reservations: BTreeMap<ReservationId, (Resource, u64)>,
    next_id: u64,
}

impl CapacityLedger {
    pub fn new(topo: &Topology) -> Self {
        let mut capacity = BTreeMap::new();
        for n in topo.nodes() {
            capacity.insert(Resource::Compute(n.id.clone()), n.compute);
            capacity.insert(Resource::Storage(n.id.clone()), n.storage_mb);
        }
        for l in topo.infra_links() {
            capacity.insert(Resource::Bandwidth(l.id.clone()), l.bandwidth_kbps());
        }
        let used = capacity.keys().map(|r| (r.clone(), 0)).collect();
        CapacityLedger {
            capacity,
            used,
            reservations: BTreeMap::new(),
            next_id: 1,
        }
    }

    pub fn capacity(&self, r: &Resource) -> u64 {
        self.capacity.get(r).copied().unwrap_or(0)
    }

    pub fn used(&self, r: &Resource) -> u64 {
        self.used.get(r).copied().unwrap_or(0)
    }

    pub fn residual(&self, r: &Resource) -> u64 {
        self.capacity(r) - self.used(r)
    }

    pub fn reservation(&self, id: ReservationId) -> Option<&(Resource, u64)> {
        self.reservations.get(&id)
    }

    pub fn outstanding(&self) -> usize {
        self.reservations.len()
    }

    pub fn allocate(&mut self, resource: Resource, amount: u64) -> Result<ReservationId, LedgerError> {
        if amount == 0 {
            return Err(LedgerError::InvalidAmount);
        }
        if !self.capacity.contains_key(&resource) {
            return Err(LedgerError::UnknownResource(resource));
        }
        let available = self.residual(&resource);
        if amount > available {
            return Err(LedgerError::InsufficientCapacity {
                resource,
                requested: amount,
                available,
            });
        }
        *self.used.get_mut(&resource).unwrap() += amount;
        let id = ReservationId(self.next_id);
        self.next_id += 1;
        self.reservations.insert(id, (resource, amount));
        Ok(id)
    }

    pub fn release(&mut self, id: ReservationId) -> Result<(Resource, u64), LedgerError> {
        let (resource, amount) = self
            .reservations
            .remove(&id)
            .ok_or(LedgerError::UnknownReservation(id))?;
        *self.used.get_mut(&resource).unwrap() -= amount;
        Ok((resource, amount))
    }

    /// Changes a reservation's amount in place. Growth must fit the residual capacity.
    pub fn resize(&mut self, id: ReservationId, new_amount: u64) -> Result<u64, LedgerError> {
        if new_amount == 0 {
            return Err(LedgerError::InvalidAmount);
        }
        let (resource, old) = self
            .reservations
            .get(&id)
            .cloned()
            .ok_or(LedgerError::UnknownReservation(id))?;
        if new_amount > old {
            let available = self.residual(&resource);
            if new_amount - old > available {
                return Err(LedgerError::InsufficientCapacity {
                    resource,
                    requested: new_amount - old,
                    available,
                });
            }
        }
        let used = self.used.get_mut(&resource).unwrap();
        *used = *used - old + new_amount;
        self.reservations.get_mut(&id).unwrap().1 = new_amount;
        Ok(old)
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        let mut snap = LedgerSnapshot {
            reservations: self.reservations.len(),
            ..Default::default()
        };
        for (r, used) in &self.used {
            match r {
                Resource::Compute(n) => snap.compute.insert(n.clone(), *used),
                Resource::Storage(n) => snap.storage_mb.insert(n.clone(), *used),
                Resource::Bandwidth(l) => snap.bandwidth_kbps.insert(l.clone(), *used),
            };
        }
        snap
    }
}
