//! Timestamped command scripts.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ApiError, Command};
use crate::orchestrator::SliceTemplate;

/// Scripts with no explicit end run this long past their last command.
pub const DEFAULT_TAIL_MS: f64 = 10_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptCommand {
    pub at_ms: f64,
    #[serde(flatten)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scenario {
    pub commands: Vec<ScriptCommand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_ms: Option<f64>,
}

impl Scenario {
    pub fn parse(document: &str) -> Result<Scenario, ApiError> {
        let value: Value = serde_json::from_str(document).map_err(|e| script(0, format!("not JSON: {e}")))?;
        Scenario::from_value(value)
    }

    /// Validates every entry; `line` in errors is the 1-based index of the command.
    pub fn from_value(value: Value) -> Result<Scenario, ApiError> {
        let Value::Object(mut top) = value else {
            return Err(script(0, "script must be an object with a commands array"));
        };
        let end_ms = match top.remove("end_ms") {
            None | Some(Value::Null) => None,
            Some(v) => Some(non_negative(&v).ok_or_else(|| script(0, "end_ms must be a non-negative number"))?),
        };
        let entries = match top.remove("commands") {
            Some(Value::Array(a)) => a,
            _ => return Err(script(0, "commands must be an array")),
        };
        if let Some(k) = top.keys().next() {
            return Err(script(0, format!("unknown field {k}")));
        }

        let mut commands = Vec::with_capacity(entries.len());
        let mut last = 0.0;
        for (i, entry) in entries.into_iter().enumerate() {
            let line = i + 1;
            let Value::Object(mut obj) = entry else {
                return Err(script(line, "command must be an object"));
            };
            let at_ms = obj
                .remove("at_ms")
                .as_ref()
                .and_then(non_negative)
                .ok_or_else(|| script(line, "at_ms must be a non-negative number"))?;
            if at_ms < last {
                return Err(script(line, format!("timestamp {at_ms} ms precedes {last} ms")));
            }
            last = at_ms;
            let name = match obj.remove("command") {
                Some(Value::String(s)) => s,
                _ => return Err(script(line, "command must be a string")),
            };
            let args = obj.remove("args").unwrap_or_else(|| Value::Object(Default::default()));
            if let Some(k) = obj.keys().next() {
                return Err(script(line, format!("unknown field {k}")));
            }
            commands.push(ScriptCommand { at_ms, command: parse_command(line, &name, args)? });
        }
        if let Some(end) = end_ms {
            if end < last {
                return Err(script(0, format!("end_ms {end} precedes the last command at {last} ms")));
            }
        }
        Ok(Scenario { commands, end_ms })
    }

    pub fn end_ms(&self) -> f64 {
        self.end_ms
            .unwrap_or_else(|| self.commands.last().map_or(0.0, |c| c.at_ms + DEFAULT_TAIL_MS))
    }
}

/// Parses one command; template errors keep their field path.
pub fn parse_command(line: usize, name: &str, value: Value) -> Result<Command, ApiError> {
    if name == "create_slice" {
        return SliceTemplate::from_value(value)
            .map(Command::CreateSlice)
            .map_err(|e| script(line, format!("args.{}: {}", e.path, e.message)));
    }
    fn args<T: serde::de::DeserializeOwned>(line: usize, args: Value) -> Result<T, ApiError> {
        serde_path_to_error::deserialize(args).map_err(|e| {
            let path = e.path().to_string();
            script(line, format!("args.{path}: {}", e.into_inner()))
        })
    }
    Ok(match name {
        "delete_slice" => Command::DeleteSlice(args(line, value)?),
        "toggle_mobility" => Command::ToggleMobility(args(line, value)?),
        "join" => Command::Join(args(line, value)?),
        "leave" => Command::Leave(args(line, value)?),
        "publish" => Command::Publish(args(line, value)?),
        "stream" => Command::Stream(args(line, value)?),
        "move" => Command::Move(args(line, value)?),
        "handoff" => Command::Handoff(args(line, value)?),
        "adapt" => Command::Adapt(args(line, value)?),
        other => return Err(script(line, format!("unknown command {other}"))),
    })
}

fn non_negative(v: &Value) -> Option<f64> {
    v.as_f64().filter(|x| x.is_finite() && *x >= 0.0)
}

fn script(line: usize, message: impl Into<String>) -> ApiError {
    ApiError::Script { line, message: message.into() }
}
