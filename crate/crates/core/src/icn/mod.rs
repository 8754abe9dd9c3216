//! Name-based forwarding with per-slice PIT, CS and FIB.

pub mod cs;
pub mod fib;
pub mod forwarder;
pub mod packet;
pub mod pit;

pub use cs::{ContentStore, CsEntry};
pub use fib::{Fib, FibEntry};
pub use forwarder::{
    fib_route, DataResult, ForwardError, ForwarderState, InterestOutcome, InterestResult, Route, SliceCounters,
    SliceTables, SweepResult,
};
pub use packet::{
    Action, Data, FaceId, Hint, HintOrigin, Interest, Nack, NackReason, Packet, SliceId, DEFAULT_INTEREST_LIFETIME_MS,
};
pub use pit::{Pit, PitEntry};
