//! Slice templates: the SLA-bearing request a slice is synthesized from.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CACHE_WINDOW_S: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSpec {
    pub site_id: String,
    pub poa_node_id: String,
    pub expected_participants: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceTemplate {
    pub slice_name: String,
    pub sites: Vec<SiteSpec>,
    pub per_stream_kbps: u64,
    pub latency_bound_ms: f64,
    #[serde(default)]
    pub mobility_enabled: bool,
    #[serde(default = "default_window")]
    pub cache_window_s: f64,
    /// Carried, not enforced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub availability: Option<String>,
    /// Carried, not enforced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub security: Option<String>,
}

fn default_window() -> f64 {
    DEFAULT_CACHE_WINDOW_S
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{path}: {message}")]
pub struct TemplateError {
    /// Field path such as `sites[1].poa_node_id`; `.` for document-level problems.
    pub path: String,
    pub message: String,
}

impl TemplateError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        TemplateError {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// A missing field is reported at its own path rather than its parent's.
fn schema_error(e: serde_path_to_error::Error<serde_json::Error>) -> TemplateError {
    let message = e.inner().to_string();
    let mut path = e.path().to_string();
    if let Some(field) = message.strip_prefix("missing field `").and_then(|r| r.split('`').next()) {
        path = if path == "." { field.to_string() } else { format!("{path}.{field}") };
    }
    TemplateError::new(path, message)
}

fn is_component(s: &str) -> bool {
    !s.is_empty() && !s.contains('/') && !s.chars().any(char::is_whitespace)
}

impl SliceTemplate {
    /// Parses and validates a JSON template document.
    pub fn parse(document: &str) -> Result<SliceTemplate, TemplateError> {
        let de = &mut serde_json::Deserializer::from_str(document);
        let t: SliceTemplate = serde_path_to_error::deserialize(de)
            .map_err(schema_error)?;
        t.validate()?;
        Ok(t)
    }

    /// Same as `parse`, from an already-decoded JSON value.
    pub fn from_value(value: serde_json::Value) -> Result<SliceTemplate, TemplateError> {
        let t: SliceTemplate = serde_path_to_error::deserialize(value)
            .map_err(schema_error)?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        if !is_component(&self.slice_name) {
            return Err(TemplateError::new(
                "slice_name",
                "must be a non-empty name component without '/' or whitespace",
            ));
        }
        if self.sites.len() < 2 {
            return Err(TemplateError::new("sites", "a conference slice needs at least 2 sites"));
        }
        let mut poas = BTreeSet::new();
        let mut ids = BTreeSet::new();
        for (i, s) in self.sites.iter().enumerate() {
            if !is_component(&s.site_id) {
                return Err(TemplateError::new(format!("sites[{i}].site_id"), "invalid site id"));
            }
            if !ids.insert(&s.site_id) {
                return Err(TemplateError::new(format!("sites[{i}].site_id"), "duplicate site id"));
            }
            if !poas.insert(&s.poa_node_id) {
                return Err(TemplateError::new(
                    format!("sites[{i}].poa_node_id"),
                    "poa_node_id must be distinct across sites",
                ));
            }
            if s.expected_participants < 1 {
                return Err(TemplateError::new(
                    format!("sites[{i}].expected_participants"),
                    "must be at least 1",
                ));
            }
        }
        if self.per_stream_kbps == 0 {
            return Err(TemplateError::new("per_stream_kbps", "must be positive"));
        }
        if !(self.latency_bound_ms > 0.0 && self.latency_bound_ms.is_finite()) {
            return Err(TemplateError::new("latency_bound_ms", "must be positive"));
        }
        if !(self.cache_window_s > 0.0 && self.cache_window_s.is_finite()) {
            return Err(TemplateError::new("cache_window_s", "must be positive"));
        }
        Ok(())
    }

    pub fn total_participants(&self) -> u64 {
        self.sites.iter().map(|s| s.expected_participants as u64).sum()
    }

    /// Copy with per-site participant counts replaced.
    pub fn with_participants(&self, counts: &[u32]) -> Result<SliceTemplate, TemplateError> {
        if counts.len() != self.sites.len() {
            return Err(TemplateError::new(
                "participants",
                format!("expected {} per-site counts, got {}", self.sites.len(), counts.len()),
            ));
        }
        let mut t = self.clone();
        for (site, c) in t.sites.iter_mut().zip(counts) {
            site.expected_participants = *c;
        }
        t.validate()?;
        Ok(t)
    }
}
