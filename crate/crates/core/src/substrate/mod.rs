//! Physical resources: topology, capacity ledger, link timing and the event clock.

pub mod clock;
pub mod ledger;
pub mod link;
pub mod paths;
pub mod topology;

pub use clock::{ClockError, EventClock};
pub use ledger::{CapacityLedger, LedgerError, LedgerSnapshot, ReservationId, Resource};
pub use link::{LinkError, LinkScheduler};
pub use paths::{latency_tree, shortest_latency_path, Path};
pub use topology::{AccessType, NodeRole, PhysLink, PhysNode, Topology, TopologyError};
