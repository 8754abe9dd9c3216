use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::orchestrator::{EmbeddingError, TemplateError};

/// Every error the management plane can report. Each variant has exactly one
/// HTTP status and one machine-readable code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApiError {
    #[error("{0}")]
    Template(TemplateError),
    #[error("{0}")]
    Embedding(EmbeddingError),
    #[error("slice name {0} is already in use")]
    DuplicateSlice(String),
    #[error("unknown slice {0}")]
    UnknownSlice(String),
    #[error("unknown participant {0}")]
    UnknownParticipant(String),
    #[error("participant {0} already joined")]
    DuplicateParticipant(String),
    #[error("invalid participant id {0:?}")]
    InvalidParticipant(String),
    #[error("participant {0} exists in several slices; name the slice")]
    AmbiguousParticipant(String),
    #[error("{0} is not an access_poa node")]
    InvalidPoa(String),
    #[error("PoA {poa} has no {iface} access link")]
    NoSuchInterface { poa: String, iface: String },
    #[error("participant {0} does not produce")]
    NotProducer(String),
    #[error("participant {0} produces; producers move with a handoff")]
    ProducerMustHandoff(String),
    #[error("no mobility-tracked prefix for participant {0}")]
    UnknownPrefix(String),
    #[error("handoff target equals the current attachment of {0}")]
    InvalidHandoff(String),
    #[error("participant {0} is detached by a handoff in progress")]
    HandoffInProgress(String),
    #[error("mobility is disabled on slice {slice}; handoff {handoff_id} moved the producer without late binding")]
    MobilityDisabled { slice: String, handoff_id: u64 },
    #[error("adaptation rejected: {0}")]
    AdaptRejected(String),
    #[error("script error at command {line}: {message}")]
    Script { line: usize, message: String },
    #[error("bad request: {0}")]
    BadRequest(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub detail: Value,
}

impl ApiError {
    pub fn status(&self) -> u16 {
        use ApiError::*;
        match self {
            Template(_) | InvalidParticipant(_) | AmbiguousParticipant(_) | InvalidPoa(_) | NoSuchInterface { .. }
            | InvalidHandoff(_) | Script { .. } | BadRequest(_) => 400,
            UnknownSlice(_) | UnknownParticipant(_) | UnknownPrefix(_) => 404,
            Embedding(_) | DuplicateSlice(_) | DuplicateParticipant(_) | NotProducer(_) | ProducerMustHandoff(_)
            | HandoffInProgress(_) | MobilityDisabled { .. } | AdaptRejected(_) => 409,
        }
    }

    pub fn code(&self) -> &'static str {
        use ApiError::*;
        match self {
            Template(_) => "template_error",
            Embedding(_) => "embedding_error",
            DuplicateSlice(_) => "duplicate_slice",
            UnknownSlice(_) => "unknown_slice",
            UnknownParticipant(_) => "unknown_participant",
            DuplicateParticipant(_) => "duplicate_participant",
            InvalidParticipant(_) => "invalid_participant",
            AmbiguousParticipant(_) => "ambiguous_participant",
            InvalidPoa(_) => "invalid_poa",
            NoSuchInterface { .. } => "no_such_interface",
            NotProducer(_) => "not_producer",
            ProducerMustHandoff(_) => "producer_must_handoff",
            UnknownPrefix(_) => "unknown_prefix",
            InvalidHandoff(_) => "invalid_handoff",
            HandoffInProgress(_) => "handoff_in_progress",
            MobilityDisabled { .. } => "mobility_disabled",
            AdaptRejected(_) => "adapt_rejected",
            Script { .. } => "script_error",
            BadRequest(_) => "bad_request",
        }
    }

    pub fn body(&self) -> ErrorBody {
        let detail = match self {
            ApiError::Template(e) => json!({ "path": e.path }),
            ApiError::Embedding(e) => json!({ "reason": e.reason }),
            ApiError::MobilityDisabled { handoff_id, .. } => json!({ "handoff_id": handoff_id }),
            ApiError::Script { line, .. } => json!({ "line": line }),
            _ => Value::Null,
        };
        ErrorBody {
            code: self.code(),
            message: self.to_string(),
            detail,
        }
    }
}

impl From<TemplateError> for ApiError {
    fn from(e: TemplateError) -> Self {
        ApiError::Template(e)
    }
}

impl From<EmbeddingError> for ApiError {
    fn from(e: EmbeddingError) -> Self {
        ApiError::Embedding(e)
    }
}
