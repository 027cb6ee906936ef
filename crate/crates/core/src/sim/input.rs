use crate::geometry::Vec2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One tick of avatar input. `move` is avatar-local: +y forward, +x right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputFrame {
    pub tick: u64,
    #[serde(rename = "move")]
    pub mv: Vec2,
    pub rot: i8,
    pub act: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum InputLogError {
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("input log has a gap: expected tick {expected}, found {found}")]
    LogGap { expected: u64, found: u64 },
}

impl InputFrame {
    pub fn neutral(tick: u64) -> InputFrame {
        InputFrame {
            tick,
            mv: Vec2::ZERO,
            rot: 0,
            act: false,
        }
    }

    /// Components clamped to [-1, 1], magnitude to 1, rotation to {-1, 0, 1}.
    pub fn clamped(mut self) -> InputFrame {
        let fix = |v: f64| {
            if v.is_finite() {
                v.clamp(-1.0, 1.0)
            } else {
                0.0
            }
        };
        let mut mv = Vec2::new(fix(self.mv.x), fix(self.mv.y));
        let len = mv.length();
        if len > 1.0 {
            mv = mv * (1.0 / len);
        }
        self.mv = mv;
        self.rot = self.rot.signum();
        self
    }
}

/// Parse a newline-delimited input log. Blank lines are skipped.
pub fn parse_input_log(text: &str) -> Result<Vec<InputFrame>, InputLogError> {
    let mut out: Vec<InputFrame> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let frame: InputFrame = serde_json::from_str(line).map_err(|e| InputLogError::Format {
            line: i + 1,
            reason: e.to_string(),
        })?;
        let expected = out.len() as u64;
        if frame.tick != expected {
            return Err(InputLogError::LogGap {
                expected,
                found: frame.tick,
            });
        }
        out.push(frame);
    }
    Ok(out)
}

pub fn write_input_log(frames: &[InputFrame]) -> String {
    let mut s = String::new();
    for f in frames {
        s.push_str(&serde_json::to_string(f).expect("frame serializes"));
        s.push('\n');
    }
    s
}
