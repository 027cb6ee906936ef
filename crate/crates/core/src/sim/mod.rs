//! World state, the fixed-step loop, hashing and replay.

mod config;
mod event;
mod hash;
mod headless;
mod input;
mod replay;
mod rng;
mod world;

pub use config::SimConfig;
pub use event::{Event, EventBody};
pub use hash::{fnv1a64, Canonical};
pub use headless::{run_headless, run_headless_with, HeadlessRun};
pub use input::{parse_input_log, write_input_log, InputFrame, InputLogError};
pub use replay::{
    checkpoint_due, parse_checkpoints, run_replay, write_checkpoints, CheckpointError, ReplayError,
    ReplayOutcome, CHECKPOINT_INTERVAL,
};
pub use rng::SimRng;
pub use world::{
    canonical_bytes, init_world, state_hash, InitError, SimContext, SimInputs, StepError,
    StepStats, World, WorldState,
};
