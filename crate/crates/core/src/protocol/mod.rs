//! Wire messages, snapshots and deltas, and the transport-free session.

mod session;
mod snapshot;
mod wire;

pub use session::{Session, FULL_SNAPSHOT_INTERVAL, INPUT_QUEUE_CAP};
pub use snapshot::{
    apply_delta, make_delta, snapshot, AgentView, AvatarView, Delta, ObstacleView, SignalView,
    Snapshot, TourView,
};
pub use wire::{codes, DecodeError, WireMessage, PROTO_VERSION};
