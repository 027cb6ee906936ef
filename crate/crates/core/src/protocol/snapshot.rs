use crate::agents::{AgentId, AgentKind, AgentState};
use crate::geometry::{snap_um, Vec2};
use crate::sim::{Event, World};
use crate::site::{LevelId, SignalColor};
use crate::tour::{ArrowGuide, BarrierPhase, MutationRecord, PathPoint};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

fn snap(v: Vec2) -> Vec2 {
    Vec2::new(snap_um(v.x), snap_um(v.y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentView {
    pub id: AgentId,
    pub kind: AgentKind,
    pub archetype: u32,
    pub level: LevelId,
    pub position: Vec2,
    pub speed: f64,
}

impl AgentView {
    pub fn of(a: &AgentState) -> AgentView {
        AgentView {
            id: a.id,
            kind: a.kind(),
            archetype: a.archetype,
            level: a.level,
            position: snap(a.position),
            speed: snap_um(a.speed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvatarView {
    pub level: LevelId,
    pub position: Vec2,
    pub heading: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_transit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalView {
    pub id: String,
    pub color: SignalColor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourView {
    pub target_index: usize,
    pub phases: Vec<BarrierPhase>,
    pub completed: bool,
    pub guided_path: Vec<PathPoint>,
    pub arrows: Vec<ArrowGuide>,
}

/// Current offset of a moved obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleView {
    pub id: String,
    pub offset: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    pub full: bool,
    pub avatar: AvatarView,
    pub agents: Vec<AgentView>,
    pub signals: Vec<SignalView>,
    pub tour: TourView,
    pub mutations: Vec<MutationRecord>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub tick: u64,
    pub changed_agents: Vec<AgentView>,
    pub removed_agent_ids: Vec<AgentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avatar: Option<AvatarView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tour: Option<TourView>,
    pub events: Vec<Event>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signals: Option<Vec<SignalView>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutations: Option<Vec<MutationRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacles: Option<Vec<ObstacleView>>,
}

fn snap_path(points: &[PathPoint]) -> Vec<PathPoint> {
    points
        .iter()
        .map(|p| PathPoint {
            level: p.level,
            p: snap(p.p),
        })
        .collect()
}

/// Full snapshot of a world, every real snapped to micrometers.
pub fn snapshot(world: &World) -> Snapshot {
    let s = &world.state;
    let av = &s.avatar;
    Snapshot {
        tick: s.tick,
        full: true,
        avatar: AvatarView {
            level: av.level,
            position: snap(av.position),
            heading: av.heading,
            in_transit: av.in_transit.as_ref().map(|t| t.connector.clone()),
        },
        agents: s.agents.values().map(AgentView::of).collect(),
        signals: s
            .signals
            .iter()
            .map(|(id, &color)| SignalView {
                id: id.clone(),
                color,
            })
            .collect(),
        tour: TourView {
            target_index: s.tour.target_index,
            phases: s.tour.phases.clone(),
            completed: s.tour.completed,
            guided_path: snap_path(&s.tour.guided_path),
            arrows: s
                .runtime
                .arrows
                .iter()
                .map(|a| ArrowGuide {
                    points: snap_path(&a.points),
                    ..a.clone()
                })
                .collect(),
        },
        mutations: s.mutations_applied.clone(),
        obstacles: s
            .runtime
            .obstacle_offsets
            .iter()
            .map(|(id, &off)| ObstacleView {
                id: id.clone(),
                offset: snap(off),
            })
            .collect(),
    }
}

/// Delta taking `prev` to `curr`. `events` are all events emitted since
/// `prev` was taken.
pub fn make_delta(prev: &Snapshot, curr: &Snapshot, events: Vec<Event>) -> Delta {
    let before: BTreeMap<AgentId, &AgentView> = prev.agents.iter().map(|a| (a.id, a)).collect();
    let changed_agents = curr
        .agents
        .iter()
        .filter(|a| before.get(&a.id) != Some(a))
        .cloned()
        .collect();
    let now: BTreeMap<AgentId, ()> = curr.agents.iter().map(|a| (a.id, ())).collect();
    let removed_agent_ids = prev
        .agents
        .iter()
        .filter(|a| !now.contains_key(&a.id))
        .map(|a| a.id)
        .collect();
    fn diff<T: PartialEq + Clone>(a: &T, b: &T) -> Option<T> {
        (a != b).then(|| b.clone())
    }
    Delta {
        tick: curr.tick,
        changed_agents,
        removed_agent_ids,
        avatar: diff(&prev.avatar, &curr.avatar),
        tour: diff(&prev.tour, &curr.tour),
        events,
        signals: diff(&prev.signals, &curr.signals),
        mutations: diff(&prev.mutations, &curr.mutations),
        obstacles: diff(&prev.obstacles, &curr.obstacles),
    }
}

/// Client-side reconstruction: apply `delta` to `prev`.
pub fn apply_delta(prev: &Snapshot, delta: &Delta) -> Snapshot {
    let mut agents: BTreeMap<AgentId, AgentView> =
        prev.agents.iter().map(|a| (a.id, a.clone())).collect();
    for id in &delta.removed_agent_ids {
        agents.remove(id);
    }
    for a in &delta.changed_agents {
        agents.insert(a.id, a.clone());
    }
    Snapshot {
        tick: delta.tick,
        full: true,
        avatar: delta.avatar.clone().unwrap_or_else(|| prev.avatar.clone()),
        agents: agents.into_values().collect(),
        signals: delta
            .signals
            .clone()
            .unwrap_or_else(|| prev.signals.clone()),
        tour: delta.tour.clone().unwrap_or_else(|| prev.tour.clone()),
        mutations: delta
            .mutations
            .clone()
            .unwrap_or_else(|| prev.mutations.clone()),
        obstacles: delta
            .obstacles
            .clone()
            .unwrap_or_else(|| prev.obstacles.clone()),
    }
}
