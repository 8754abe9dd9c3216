//! Machine-readable event log: one JSON object per line.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t_ms: f64,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<String>,
    #[serde(flatten)]
    pub fields: Map<String, Value>,
}

impl LogRecord {
    pub fn field(&self, key: &str) -> Option<&Value> {
        self.fields.get(key)
    }

    pub fn str_field(&self, key: &str) -> Option<&str> {
        self.fields.get(key).and_then(Value::as_str)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("log records serialize")
    }
}

/// Renders records as newline-delimited JSON.
pub fn to_ndjson<R: std::borrow::Borrow<LogRecord>>(records: &[R]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.borrow().to_line());
        out.push('\n');
    }
    out
}

/// Records concerning one slice, in order.
pub fn slice_trace<'a>(records: &'a [LogRecord], slice: &str) -> Vec<&'a LogRecord> {
    records.iter().filter(|r| r.slice.as_deref() == Some(slice)).collect()
}
