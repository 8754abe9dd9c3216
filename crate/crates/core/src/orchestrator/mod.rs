//! Slice creation pipeline: template intake, service graph, partitioning and embedding.

pub mod embed;
pub mod graph;
pub mod partition;
pub mod pipeline;
pub mod template;

pub use embed::{embed, embed_all, AllocationMatrix, EmbedFailure, EmbeddingError};
pub use graph::{build_service_graph, ServiceGraph, VLink, VNode, VNodeKind, SYNC_VNODE};
pub use partition::{assign_domains, partition, Subgraph};
pub use pipeline::{adapt, admit, release_all, AdaptError, AdaptReport, AdmitError, Admission, ResourceTotals};
pub use template::{SiteSpec, SliceTemplate, TemplateError};
