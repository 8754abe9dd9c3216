//! Deterministic emulator for ICN network slices.
//!
//! A slice template is turned into a service graph, partitioned by domain and embedded
//! onto a substrate topology. Each embedded slice gets its own PIT, CS and FIB on every
//! forwarder it touches; a conference service and a per-slice producer mobility service
//! run on top. Everything is driven by one seeded event clock.

pub mod api;
pub mod conference;
pub mod emulator;
pub mod fixtures;
pub mod icn;
pub mod mobility;
pub mod name;
pub mod orchestrator;
pub mod substrate;
pub mod time;

pub use name::{Name, ParseError};
pub use time::{SimDuration, SimTime};
