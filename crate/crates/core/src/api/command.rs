//! Commands accepted by the emulator, from HTTP requests or scenario scripts.

use serde::{Deserialize, Serialize};

use crate::conference::Role;
use crate::orchestrator::SliceTemplate;
use crate::substrate::AccessType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceRef {
    pub slice: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityArgs {
    pub slice: String,
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JoinArgs {
    pub slice: String,
    pub participant: String,
    pub poa: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iface: Option<AccessType>,
    /// Defaults to both roles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roles: Option<Vec<Role>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantRef {
    pub slice: String,
    pub participant: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishArgs {
    pub slice: String,
    pub participant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_bytes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamArgs {
    pub slice: String,
    pub participant: String,
    pub count: u64,
    pub interval_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_bytes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoveArgs {
    pub slice: String,
    pub participant: String,
    pub to_poa: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iface: Option<AccessType>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandoffArgs {
    pub slice: String,
    pub participant: String,
    pub to_poa: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iface: Option<AccessType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptArgs {
    pub slice: String,
    pub participants: Vec<u32>,
}

/// One mutation of the emulation. Slices are referenced by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "snake_case")]
pub enum Command {
    CreateSlice(SliceTemplate),
    DeleteSlice(SliceRef),
    ToggleMobility(MobilityArgs),
    Join(JoinArgs),
    Leave(ParticipantRef),
    Publish(PublishArgs),
    Stream(StreamArgs),
    Move(MoveArgs),
    Handoff(HandoffArgs),
    Adapt(AdaptArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CreateSlice(_) => "create_slice",
            Command::DeleteSlice(_) => "delete_slice",
            Command::ToggleMobility(_) => "toggle_mobility",
            Command::Join(_) => "join",
            Command::Leave(_) => "leave",
            Command::Publish(_) => "publish",
            Command::Stream(_) => "stream",
            Command::Move(_) => "move",
            Command::Handoff(_) => "handoff",
            Command::Adapt(_) => "adapt",
        }
    }

    /// Name of the slice the command acts on.
    pub fn slice(&self) -> &str {
        match self {
            Command::CreateSlice(t) => &t.slice_name,
            Command::DeleteSlice(a) => &a.slice,
            Command::ToggleMobility(a) => &a.slice,
            Command::Join(a) => &a.slice,
            Command::Leave(a) => &a.slice,
            Command::Publish(a) => &a.slice,
            Command::Stream(a) => &a.slice,
            Command::Move(a) => &a.slice,
            Command::Handoff(a) => &a.slice,
            Command::Adapt(a) => &a.slice,
        }
    }
}
