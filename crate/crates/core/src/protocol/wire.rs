use super::snapshot::{Delta, Snapshot};
use crate::geometry::Vec2;
use crate::sim::InputFrame;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const PROTO_VERSION: u32 = 1;

/// Error codes carried by `error` messages.
pub mod codes {
    pub const UNSUPPORTED: &str = "UNSUPPORTED";
    pub const PROTO: &str = "PROTO";
    pub const MALFORMED: &str = "MALFORMED";
    pub const INPUT_OVERFLOW: &str = "INPUT_OVERFLOW";
    pub const NOT_READY: &str = "NOT_READY";
}

/// Every frame on the session socket, tagged by `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum WireMessage {
    Hello {
        proto: u32,
        #[serde(default)]
        name: String,
    },
    Input {
        tick: u64,
        #[serde(rename = "move")]
        mv: Vec2,
        rot: i8,
        act: bool,
    },
    Ping {
        ts: f64,
    },
    Resync,
    Welcome {
        session: String,
        tick_hz: u32,
        site_digest: String,
        scenario_digest: String,
    },
    Snapshot(Snapshot),
    Delta(Delta),
    Pong {
        ts: f64,
    },
    Error {
        code: String,
        message: String,
    },
}

const KNOWN_TAGS: [&str; 9] = [
    "hello", "input", "ping", "resync", "welcome", "snapshot", "delta", "pong", "error",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("unsupported message type `{0}`")]
    Unsupported(String),
}

impl DecodeError {
    /// Code to report back to the peer.
    pub fn code(&self) -> &'static str {
        match self {
            DecodeError::Malformed { .. } => codes::MALFORMED,
            DecodeError::Unsupported(_) => codes::UNSUPPORTED,
        }
    }
}

fn offset_of(text: &str, e: &serde_json::Error) -> usize {
    if e.line() == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(e.line() - 1)
        .map(str::len)
        .sum();
    line_start + e.column().saturating_sub(1)
}

impl WireMessage {
    pub fn input(frame: &InputFrame) -> WireMessage {
        WireMessage::Input {
            tick: frame.tick,
            mv: frame.mv,
            rot: frame.rot,
            act: frame.act,
        }
    }

    pub fn error(code: &str, message: impl Into<String>) -> WireMessage {
        WireMessage::Error {
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("wire message serializes")
    }

    pub fn decode(text: &str) -> Result<WireMessage, DecodeError> {
        let value: Value = serde_json::from_str(text).map_err(|e| DecodeError::Malformed {
            offset: offset_of(text, &e),
            reason: e.to_string(),
        })?;
        let tag = match value.get("t") {
            Some(Value::String(t)) => t.clone(),
            Some(_) => {
                return Err(DecodeError::Malformed {
                    offset: 0,
                    reason: "`t` must be a string".into(),
                })
            }
            None => {
                return Err(DecodeError::Malformed {
                    offset: 0,
                    reason: "missing message type `t`".into(),
                })
            }
        };
        if !KNOWN_TAGS.contains(&tag.as_str()) {
            return Err(DecodeError::Unsupported(tag));
        }
        serde_json::from_value(value).map_err(|e| DecodeError::Malformed {
            offset: 0,
            reason: e.to_string(),
        })
    }

    /// The input frame carried by an `input` message, clamped.
    pub fn as_input(&self) -> Option<InputFrame> {
        match *self {
            WireMessage::Input { tick, mv, rot, act } => {
                Some(InputFrame { tick, mv, rot, act }.clamped())
            }
            _ => None,
        }
    }
}
