use std::fmt;

use serde::{Deserialize, Serialize};

use crate::name::Name;

/// Identifies a slice. Slice 0 is the control slice used by PoA signalling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SliceId(pub u32);

impl SliceId {
    pub const CONTROL: SliceId = SliceId(0);
}

impl fmt::Display for SliceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Handle of one link endpoint or local application on a node. Unique per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaceId(pub u32);

impl fmt::Display for FaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "face{}", self.0)
    }
}

/// Who attached a forwarding hint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HintOrigin {
    /// The producer's previous PoA redirected the Interest after a handoff.
    LateBinding,
    /// The consumer's ingress PoA used its updated prefix mapping.
    IngressMapping,
}

/// Forwarding hint: route on `target` (a PoA topological name) instead of the Interest name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hint {
    pub target: Name,
    pub origin: HintOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interest {
    pub slice_id: SliceId,
    pub name: Name,
    pub nonce: u64,
    pub lifetime_ms: u64,
    pub hop_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<Hint>,
    /// Topological name of the PoA where the Interest entered the network.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingress: Option<Name>,
    /// Set once a hint has been consumed, so the producer side can tell how it arrived.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routed_by: Option<HintOrigin>,
}

pub const DEFAULT_INTEREST_LIFETIME_MS: u64 = 4000;

impl Interest {
    pub fn new(slice_id: SliceId, name: Name, nonce: u64) -> Self {
        Interest {
            slice_id,
            name,
            nonce,
            lifetime_ms: DEFAULT_INTEREST_LIFETIME_MS,
            hop_count: 0,
            hint: None,
            ingress: None,
            routed_by: None,
        }
    }

    pub fn with_lifetime(mut self, lifetime_ms: u64) -> Self {
        self.lifetime_ms = lifetime_ms.max(1);
        self
    }

    pub fn wire_len(&self) -> usize {
        32 + self.name.wire_len() + self.hint.as_ref().map_or(0, |h| h.target.wire_len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Data {
    pub slice_id: SliceId,
    pub name: Name,
    pub payload_len_bytes: u64,
    /// Real payload bytes; media segments are synthetic and leave this empty.
    #[serde(default)]
    pub payload: Vec<u8>,
    /// Carried, never verified.
    #[serde(default)]
    pub signature: Vec<u8>,
    pub freshness_ms: u64,
}

impl Data {
    pub fn new(slice_id: SliceId, name: Name, payload: Vec<u8>, freshness_ms: u64) -> Self {
        Data {
            slice_id,
            name,
            payload_len_bytes: payload.len() as u64,
            payload,
            signature: Vec::new(),
            freshness_ms: freshness_ms.max(1),
        }
    }

    /// Data whose payload is only a declared size.
    pub fn synthetic(slice_id: SliceId, name: Name, payload_len_bytes: u64, freshness_ms: u64) -> Self {
        Data {
            slice_id,
            name,
            payload_len_bytes,
            payload: Vec::new(),
            signature: Vec::new(),
            freshness_ms: freshness_ms.max(1),
        }
    }

    pub fn satisfies(&self, interest: &Interest) -> bool {
        self.slice_id == interest.slice_id && self.name == interest.name
    }

    /// Bytes charged against a content-store budget.
    pub fn stored_len(&self) -> u64 {
        self.name.wire_len() as u64 + self.payload_len_bytes.max(self.payload.len() as u64)
    }

    pub fn wire_len(&self) -> usize {
        64 + self.name.wire_len() + self.payload_len_bytes.max(self.payload.len() as u64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NackReason {
    NoRoute,
    NoSlice,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nack {
    pub slice_id: SliceId,
    pub name: Name,
    pub nonce: u64,
    pub reason: NackReason,
}

impl Nack {
    pub fn wire_len(&self) -> usize {
        32 + self.name.wire_len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Interest(Interest),
    Data(Data),
    Nack(Nack),
}

impl Packet {
    pub fn slice_id(&self) -> SliceId {
        match self {
            Packet::Interest(i) => i.slice_id,
            Packet::Data(d) => d.slice_id,
            Packet::Nack(n) => n.slice_id,
        }
    }

    pub fn name(&self) -> &Name {
        match self {
            Packet::Interest(i) => &i.name,
            Packet::Data(d) => &d.name,
            Packet::Nack(n) => &n.name,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Packet::Interest(_) => "interest",
            Packet::Data(_) => "data",
            Packet::Nack(_) => "nack",
        }
    }

    pub fn wire_len(&self) -> usize {
        match self {
            Packet::Interest(i) => i.wire_len(),
            Packet::Data(d) => d.wire_len(),
            Packet::Nack(n) => n.wire_len(),
        }
    }
}

/// One packet to emit on one face.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub face: FaceId,
    pub packet: Packet,
}
