//! Management-plane vocabulary: commands, scripts and the error taxonomy.

pub mod command;
pub mod error;
pub mod scenario;

pub use command::{
    AdaptArgs, Command, HandoffArgs, JoinArgs, MobilityArgs, MoveArgs, ParticipantRef, PublishArgs, SliceRef, StreamArgs,
};
pub use error::{ApiError, ErrorBody};
pub use scenario::{parse_command, Scenario, ScriptCommand};
