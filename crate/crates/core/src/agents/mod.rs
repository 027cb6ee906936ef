//! Road vehicles, trams and pedestrians.

pub mod catalog;
pub mod pedestrian;
pub mod signal;
pub mod transit;
pub mod vehicle;

pub use catalog::{
    ArchetypeCatalog, PedestrianArchetype, TramArchetype, VehicleArchetype, PEDESTRIAN_ARCHETYPES,
    VEHICLE_ARCHETYPES,
};
pub use signal::{signal_state, SignalError, SignalProgram, SignalPrograms};
pub use transit::{
    transit_arrivals, LineTimetable, RunId, TransitError, TransitLine, TransitSchedule,
};

use crate::geometry::Vec2;
use crate::site::{LevelId, NodeId};
use serde::{Deserialize, Serialize};

pub type AgentId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Vehicle,
    Pedestrian,
    Tram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: AgentId,
    pub archetype: u32,
    pub level: LevelId,
    pub position: Vec2,
    pub speed: f64,
    /// Nav node ids of the current route and the index of the next one.
    pub route: Vec<NodeId>,
    pub route_index: usize,
    pub body: AgentBody,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentBody {
    Vehicle(VehicleState),
    Pedestrian(PedestrianState),
    Tram(TramState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub lane: String,
    /// Arc-length of the front bumper along the lane.
    pub s: f64,
    pub length: f64,
    pub desired_speed: f64,
    pub blocked_ticks: u32,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PedMode {
    Walking,
    /// Riding a connector; the level switches when `remaining` reaches zero.
    Connector {
        connector: String,
        remaining: u32,
    },
    /// Inside the goal stop polygon, waiting for a departure.
    AtStop,
    Arrived,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PedestrianState {
    pub cyclist: bool,
    pub radius: f64,
    pub max_speed: f64,
    /// Spawn point or stop feature id.
    pub goal: String,
    pub goal_node: NodeId,
    /// Ticks until another repath is allowed.
    pub repath_cooldown: u32,
    /// Consecutive walking ticks with almost no progress.
    pub stalled: u32,
    pub mode: PedMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TramState {
    pub line: String,
    pub run: RunId,
    pub s: f64,
    pub next_stop: usize,
    pub dwell_remaining: f64,
    pub done: bool,
}

impl AgentState {
    pub fn kind(&self) -> AgentKind {
        match self.body {
            AgentBody::Vehicle(_) => AgentKind::Vehicle,
            AgentBody::Pedestrian(_) => AgentKind::Pedestrian,
            AgentBody::Tram(_) => AgentKind::Tram,
        }
    }

    pub fn vehicle(&self) -> Option<&VehicleState> {
        match &self.body {
            AgentBody::Vehicle(v) => Some(v),
            _ => None,
        }
    }

    pub fn pedestrian(&self) -> Option<&PedestrianState> {
        match &self.body {
            AgentBody::Pedestrian(p) => Some(p),
            _ => None,
        }
    }

    pub fn tram(&self) -> Option<&TramState> {
        match &self.body {
            AgentBody::Tram(t) => Some(t),
            _ => None,
        }
    }
}
