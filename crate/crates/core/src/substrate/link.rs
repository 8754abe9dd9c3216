//! Link timing: propagation plus serialization, FIFO per direction and queue class.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::topology::PhysLink;
use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkError {
    #[error("link {0} is administratively down")]
    LinkDown(String),
    #[error("packet must have at least one byte")]
    EmptyPacket,
}

/// packet_bytes × 8 / (bandwidth_mbps × 1000) ms, rounded to the clock tick.
pub fn serialization_delay(packet_bytes: usize, bandwidth_mbps: f64) -> SimDuration {
    SimDuration::from_ms(packet_bytes as f64 * 8.0 / (bandwidth_mbps * 1000.0))
}

pub fn propagation_delay(link: &PhysLink) -> SimDuration {
    SimDuration::from_ms(link.latency_ms)
}

#[derive(Debug, Clone, Default)]
pub struct LinkScheduler {
    // (link, sent from endpoint a, class) -> instant the transmitter frees up
    busy_until: BTreeMap<(String, bool, u32), SimTime>,
    down: BTreeSet<String>,
}

impl LinkScheduler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_admin_up(&mut self, link_id: &str, up: bool) {
        if up {
            self.down.remove(link_id);
        } else {
            self.down.insert(link_id.to_string());
        }
    }

    pub fn is_up(&self, link_id: &str) -> bool {
        !self.down.contains(link_id)
    }

    /// Arrival time of a packet handed to the link at `at` by endpoint `from`.
    /// Packets of the same class and direction serialize back to back.
    pub fn transmit(
        &mut self,
        link: &PhysLink,
        from: &str,
        class: u32,
        packet_bytes: usize,
        at: SimTime,
    ) -> Result<SimTime, LinkError> {
        if packet_bytes == 0 {
            return Err(LinkError::EmptyPacket);
        }
        if !self.is_up(&link.id) {
            return Err(LinkError::LinkDown(link.id.clone()));
        }
        let key = (link.id.clone(), link.a == from, class);
        let free = self.busy_until.get(&key).copied().unwrap_or(SimTime::ZERO);
        let start = at.max(free);
        let done = start + serialization_delay(packet_bytes, link.bandwidth_mbps);
        self.busy_until.insert(key, done);
        Ok(done + propagation_delay(link))
    }
}
