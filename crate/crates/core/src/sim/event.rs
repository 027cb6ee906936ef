use serde::{Deserialize, Serialize};

use crate::agents::AgentKind;
use crate::geometry::Vec2;
use crate::site::LevelId;
use crate::tour::MutationSpec;

/// Something that happened during a tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventBody {
    BarrierApproached {
        barrier: String,
        /// Barrier info text, present when the interact trigger was held.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        info_shown: Option<String>,
    },
    BarrierResolved {
        barrier: String,
        mutation: MutationSpec,
    },
    TourCompleted {
        barriers: usize,
    },
    ParticleCue {
        barrier: String,
        level: LevelId,
        anchor: [f64; 3],
    },
    AgentSpawned {
        agent_id: u64,
        agent: AgentKind,
        archetype: u32,
        level: LevelId,
        position: Vec2,
    },
    AgentDespawned {
        agent_id: u64,
        agent: AgentKind,
    },
    TransitArrived {
        agent_id: u64,
        line: String,
        stop: String,
    },
    TransitDeparted {
        agent_id: u64,
        line: String,
        stop: String,
    },
    LaneChange {
        agent_id: u64,
        from_lane: String,
        to_lane: String,
        speed: f64,
        /// Gap to the new leader; absent when the target lane is free ahead.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        front_gap: Option<f64>,
        /// Gap to the new follower; absent when the target lane is free behind.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rear_gap: Option<f64>,
        follower_speed: f64,
    },
}

impl EventBody {
    pub fn name(&self) -> &'static str {
        match self {
            EventBody::BarrierApproached { .. } => "BarrierApproached",
            EventBody::BarrierResolved { .. } => "BarrierResolved",
            EventBody::TourCompleted { .. } => "TourCompleted",
            EventBody::ParticleCue { .. } => "ParticleCue",
            EventBody::AgentSpawned { .. } => "AgentSpawned",
            EventBody::AgentDespawned { .. } => "AgentDespawned",
            EventBody::TransitArrived { .. } => "TransitArrived",
            EventBody::TransitDeparted { .. } => "TransitDeparted",
            EventBody::LaneChange { .. } => "LaneChange",
        }
    }

    /// Step phase that emits this kind (1 spawn .. 8 despawn).
    pub fn phase(&self) -> u8 {
        match self {
            EventBody::AgentSpawned { .. } => 1,
            EventBody::TransitArrived { .. } | EventBody::TransitDeparted { .. } => 3,
            EventBody::LaneChange { .. } => 4,
            EventBody::ParticleCue { .. }
            | EventBody::BarrierApproached { .. }
            | EventBody::BarrierResolved { .. }
            | EventBody::TourCompleted { .. } => 7,
            EventBody::AgentDespawned { .. } => 8,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_json_shape() {
        let e = Event {
            tick: 4,
            body: EventBody::AgentDespawned {
                agent_id: 9,
                agent: AgentKind::Vehicle,
            },
        };
        let text = serde_json::to_string(&e).unwrap();
        assert_eq!(
            text,
            r#"{"tick":4,"kind":"AgentDespawned","agent_id":9,"agent":"vehicle"}"#
        );
        assert_eq!(serde_json::from_str::<Event>(&text).unwrap(), e);
    }
}
