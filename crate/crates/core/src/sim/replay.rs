use super::{init_world, InitError, InputFrame, SimContext, StepError};
use std::sync::Arc;
use thiserror::Error;

/// Ticks between checkpoint hashes. Tick 0 is always a checkpoint.
pub const CHECKPOINT_INTERVAL: u64 = 100;

pub fn checkpoint_due(tick: u64) -> bool {
    tick.is_multiple_of(CHECKPOINT_INTERVAL)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayOutcome {
    Pass,
    Fail {
        tick: u64,
        expected: u64,
        actual: u64,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("input log has a gap: expected tick {expected}, found {found}")]
    LogGap { expected: u64, found: u64 },
    #[error("checkpoint at tick {tick} lies beyond the {len}-frame log")]
    CheckpointBeyondLog { tick: u64, len: u64 },
    #[error(transparent)]
    Init(#[from] InitError),
    #[error(transparent)]
    Step(#[from] StepError),
}

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
}

/// Parse `tick<TAB>hex` lines. Ticks must strictly increase.
pub fn parse_checkpoints(text: &str) -> Result<Vec<(u64, u64)>, CheckpointError> {
    let mut out: Vec<(u64, u64)> = Vec::new();
    if !text.is_empty() && !text.ends_with('\n') {
        let line = text.lines().count();
        return Err(CheckpointError::Format {
            line,
            reason: "last line is not terminated (truncated file?)".into(),
        });
    }
    for (i, line) in text.lines().enumerate() {
        let bad = |reason: &str| CheckpointError::Format {
            line: i + 1,
            reason: reason.to_string(),
        };
        if line.is_empty() {
            continue;
        }
        let (t, h) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected tick<TAB>hash"))?;
        let tick: u64 = t
            .parse()
            .map_err(|_| bad("tick is not an unsigned integer"))?;
        if h.len() != 16 {
            return Err(bad("hash must be 16 hex digits"));
        }
        let hash = u64::from_str_radix(h, 16).map_err(|_| bad("hash is not hex"))?;
        if out.last().is_some_and(|&(prev, _)| prev >= tick) {
            return Err(bad("ticks must strictly increase"));
        }
        out.push((tick, hash));
    }
    Ok(out)
}

pub fn write_checkpoints(points: &[(u64, u64)]) -> String {
    points
        .iter()
        .map(|(t, h)| format!("{t}\t{h:016x}\n"))
        .collect()
}

/// Step a fresh world through `log` and compare hashes at each checkpoint.
pub fn run_replay(
    ctx: Arc<SimContext>,
    seed: u64,
    log: &[InputFrame],
    checkpoints: &[(u64, u64)],
) -> Result<ReplayOutcome, ReplayError> {
    for (i, f) in log.iter().enumerate() {
        if f.tick != i as u64 {
            return Err(ReplayError::LogGap {
                expected: i as u64,
                found: f.tick,
            });
        }
    }
    let len = log.len() as u64;
    if let Some(&(tick, _)) = checkpoints.iter().find(|(t, _)| *t > len) {
        return Err(ReplayError::CheckpointBeyondLog { tick, len });
    }
    let mut world = init_world(ctx, seed)?;
    let mut pending = checkpoints.iter().peekable();
    loop {
        let tick = world.state.tick;
        while let Some(&&(t, expected)) = pending.peek() {
            if t > tick {
                break;
            }
            pending.next();
            let actual = world.hash();
            if actual != expected {
                return Ok(ReplayOutcome::Fail {
                    tick: t,
                    expected,
                    actual,
                });
            }
        }
        if pending.peek().is_none() {
            return Ok(ReplayOutcome::Pass);
        }
        world.step(&log[tick as usize])?;
    }
}
