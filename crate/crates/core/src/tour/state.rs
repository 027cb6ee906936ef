use super::mutation::{MutationError, MutationRecord};
use super::scenario::{BarrierDef, BarrierScenario};
use crate::geometry::Vec2;
use crate::sim::EventBody;
use crate::site::{shortest_path, DistanceField, LevelId, NavGraph, NavNode, NodeId, PathError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierPhase {
    Guided,
    Approached,
    Resolved,
}

/// Point of a ground polyline, tagged with its level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub level: LevelId,
    pub p: Vec2,
}

impl PathPoint {
    pub fn of(node: &NavNode) -> PathPoint {
        PathPoint {
            level: node.level,
            p: node.position,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TourState {
    pub target_index: usize,
    pub phases: Vec<BarrierPhase>,
    pub cued: Vec<bool>,
    pub completed: bool,
    /// Ground polyline from the avatar's snap node to the target.
    pub guided_path: Vec<PathPoint>,
    pub snap_node: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TourError {
    #[error("barrier `{0}` cannot be reached on foot from the start pose")]
    UnreachableBarrier(String),
    #[error("start pose is off the walk graph")]
    StartOffGraph,
}

/// Walk node nearest to a barrier's trigger center.
pub fn trigger_node(graph: &NavGraph, b: &BarrierDef) -> Option<NodeId> {
    graph.nearest_node(b.level, b.trigger.center)
}

/// Shortest ground path from the avatar to the barrier's trigger center.
pub fn guided_path(
    graph: &NavGraph,
    level: LevelId,
    position: Vec2,
    target: &BarrierDef,
    exclude: &BTreeSet<String>,
) -> Result<Vec<PathPoint>, PathError> {
    let from = graph
        .nearest_node(level, position)
        .ok_or(PathError::InvalidNode(u32::MAX))?;
    let to = trigger_node(graph, target).ok_or(PathError::InvalidNode(u32::MAX))?;
    let path = shortest_path(graph, from, to, exclude)?;
    Ok(path
        .nodes
        .iter()
        .map(|&n| PathPoint::of(graph.node(n)))
        .collect())
}

pub fn init_tour(
    scenario: &BarrierScenario,
    graph: &NavGraph,
    level: LevelId,
    position: Vec2,
    exclude: &BTreeSet<String>,
) -> Result<TourState, TourError> {
    let start = graph
        .nearest_node(level, position)
        .ok_or(TourError::StartOffGraph)?;
    // Walk edges come in symmetric pairs, so distances toward the start
    // equal distances from it.
    let field = DistanceField::toward(graph, start, exclude);
    for b in &scenario.barriers {
        let reachable = trigger_node(graph, b)
            .and_then(|n| field.distance(n))
            .is_some();
        if !reachable {
            return Err(TourError::UnreachableBarrier(b.id.clone()));
        }
    }
    let n = scenario.barriers.len();
    let guided = match scenario.barriers.first() {
        Some(b) => guided_path(graph, level, position, b, exclude).unwrap_or_default(),
        None => Vec::new(),
    };
    Ok(TourState {
        target_index: 0,
        phases: vec![BarrierPhase::Guided; n],
        cued: vec![false; n],
        completed: n == 0,
        guided_path: guided,
        snap_node: Some(start),
    })
}

/// One tour update for the current tick. `resolve` applies a barrier's
/// mutation to the world. Returns the emitted events in order.
pub fn advance_tour(
    tour: &mut TourState,
    scenario: &BarrierScenario,
    level: LevelId,
    position: Vec2,
    act: bool,
    resolve: &mut dyn FnMut(&BarrierDef) -> Result<MutationRecord, MutationError>,
) -> Vec<EventBody> {
    let mut events = Vec::new();
    if tour.completed {
        return events;
    }
    let i = tour.target_index;
    let Some(b) = scenario.barriers.get(i) else {
        return events;
    };
    if b.level != level {
        return events;
    }
    let d = position.distance(b.trigger.center);
    if d <= b.highlight.cue_radius && !tour.cued[i] && tour.phases[i] == BarrierPhase::Guided {
        tour.cued[i] = true;
        events.push(EventBody::ParticleCue {
            barrier: b.id.clone(),
            level: b.level,
            anchor: b.highlight.marker_anchor,
        });
    }
    if d <= b.trigger.radius {
        tour.phases[i] = BarrierPhase::Approached;
        events.push(EventBody::BarrierApproached {
            barrier: b.id.clone(),
            info_shown: act.then(|| b.info_text.clone()),
        });
        if let Err(e) = resolve(b) {
            tracing::error!(barrier = %b.id, error = %e, "barrier resolution failed");
        }
        tour.phases[i] = BarrierPhase::Resolved;
        events.push(EventBody::BarrierResolved {
            barrier: b.id.clone(),
            mutation: b.resolution.clone(),
        });
        tour.target_index += 1;
        if tour.target_index == scenario.barriers.len() {
            tour.completed = true;
            tour.guided_path.clear();
            events.push(EventBody::TourCompleted {
                barriers: scenario.barriers.len(),
            });
        }
    }
    events
}
