//! Conference application: a roster sync service plus producers and consumers.

pub mod names;
pub mod participant;
pub mod sync;

use thiserror::Error;

pub use participant::{Outstanding, Participant, ParticipantStats, Role, TimeoutAction, DEFAULT_PAYLOAD_BYTES};
pub use sync::{RosterSnapshot, SyncReply, SyncService, SyncState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConferenceError {
    #[error("participant {0} already joined")]
    DuplicateParticipant(String),
    #[error("unknown participant {0}")]
    UnknownParticipant(String),
    #[error("participant {0} does not produce")]
    NotProducer(String),
}
