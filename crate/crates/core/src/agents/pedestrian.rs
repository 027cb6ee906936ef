use super::{AgentId, AgentState, PedMode, PedestrianState};
use crate::geometry::Vec2;
use crate::site::{DistanceField, LevelId, NavGraph};

/// Another body a pedestrian keeps clear of (pedestrian or avatar).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub id: Option<AgentId>,
    pub level: LevelId,
    pub position: Vec2,
    pub radius: f64,
}

/// Read-only surroundings of one pedestrian update.
pub struct PedContext<'a> {
    pub graph: &'a NavGraph,
    pub field: &'a DistanceField,
    pub bodies: &'a [Body],
    pub walkable: &'a dyn Fn(LevelId, Vec2) -> bool,
    /// True when the position lies in the goal area (stop polygon).
    pub in_goal_area: &'a dyn Fn(LevelId, Vec2) -> bool,
    pub goal_is_stop: bool,
    pub dt: f64,
    pub margin: f64,
    pub repath_ticks: u32,
}

/// Distance below which a waypoint counts as reached.
const WAYPOINT_TOLERANCE: f64 = 0.05;
/// Straying further than this from the next waypoint triggers a repath.
const REPATH_DISTANCE: f64 = 2.0;
/// After this many stalled ticks a pedestrian squeezes past others.
pub const SQUEEZE_TICKS: u32 = 40;
/// After this many stalled ticks a pedestrian gives up and leaves.
pub const GIVE_UP_TICKS: u32 = 1200;
/// How far ahead (m, beyond contact) a walker starts to give way.
const LOOKAHEAD: f64 = 1.0;
/// A tick moving less than this fraction of a full step counts as stalled.
const STALL_FRACTION: f64 = 0.25;

fn connector_ticks(length: f64, speed: f64, dt: f64) -> u32 {
    ((length / speed / dt) - 1e-9).ceil().max(1.0) as u32
}

pub fn repath(agent: &mut AgentState, ctx: &PedContext<'_>) -> bool {
    let Some(start) = ctx.graph.nearest_node(agent.level, agent.position) else {
        return false;
    };
    match ctx.field.path_from(ctx.graph, start) {
        Some(p) => {
            agent.route = p.nodes;
            agent.route_index = 0;
            true
        }
        None => false,
    }
}

fn others(me: AgentId, level: LevelId, bodies: &[Body]) -> impl Iterator<Item = &Body> {
    bodies
        .iter()
        .filter(move |b| b.level == level && b.id != Some(me))
}

/// Advance one pedestrian by one tick.
pub fn pedestrian_step(agent: &mut AgentState, ctx: &PedContext<'_>) {
    let super::AgentBody::Pedestrian(p) = &mut agent.body else {
        return;
    };
    let mut ped: PedestrianState = p.clone();
    step_inner(agent, &mut ped, ctx);
    if let super::AgentBody::Pedestrian(p) = &mut agent.body {
        *p = ped;
    }
}

fn step_inner(agent: &mut AgentState, ped: &mut PedestrianState, ctx: &PedContext<'_>) {
    agent.speed = 0.0;
    match &mut ped.mode {
        PedMode::AtStop | PedMode::Arrived => return,
        PedMode::Connector { remaining, .. } => {
            *remaining = remaining.saturating_sub(1);
            if *remaining == 0 {
                if let Some(&n) = agent.route.get(agent.route_index) {
                    let node = ctx.graph.node(n);
                    agent.level = node.level;
                    agent.position = node.position;
                    agent.route_index += 1;
                }
                ped.mode = PedMode::Walking;
            }
            return;
        }
        PedMode::Walking => {}
    }
    ped.repath_cooldown = ped.repath_cooldown.saturating_sub(1);
    if ctx.goal_is_stop && (ctx.in_goal_area)(agent.level, agent.position) {
        ped.mode = PedMode::AtStop;
        return;
    }
    if agent.route_index >= agent.route.len() {
        if agent.route.last() == Some(&ped.goal_node) {
            ped.mode = PedMode::Arrived;
            return;
        }
        if !repath(agent, ctx) {
            return;
        }
        ped.repath_cooldown = ctx.repath_ticks;
    }
    // A walker pushed off its line can end up beside or past a waypoint;
    // move on once the following node is nearer than the waypoint is to it.
    while agent.route_index + 1 < agent.route.len() {
        let here = ctx.graph.node(agent.route[agent.route_index]);
        let next = ctx.graph.node(agent.route[agent.route_index + 1]);
        if here.level != agent.level
            || next.level != agent.level
            || agent.position.distance(next.position) >= here.position.distance(next.position)
        {
            break;
        }
        agent.route_index += 1;
    }
    let mut target = ctx.graph.node(agent.route[agent.route_index]).position;
    if agent.position.distance(target) > REPATH_DISTANCE
        && ped.repath_cooldown == 0
        && repath(agent, ctx)
    {
        ped.repath_cooldown = ctx.repath_ticks;
        target = ctx.graph.node(agent.route[agent.route_index]).position;
    }

    let step = ped.max_speed * ctx.dt;
    let to_target = target - agent.position;
    let d = to_target.length();
    let desired = if d <= step {
        to_target
    } else {
        to_target * (step / d)
    };
    let dir = to_target.normalized();
    let pos = agent.position;
    let lim_of = |b: &Body| ped.radius + b.radius;

    let mut push = Vec2::ZERO;
    for b in others(agent.id, agent.level, ctx.bodies) {
        let rel = b.position - pos;
        let dist = rel.length();
        let reach = lim_of(b) + ctx.margin;
        let blocks = (pos + desired).distance(b.position) < lim_of(b) && d > 0.0;
        // Start giving way early to a body straight ahead.
        let ahead = dir.dot(rel) > 0.0 && dir.cross(rel).abs() < reach && dist < reach + LOOKAHEAD;
        if dist >= reach && !blocks && !ahead {
            continue;
        }
        let away = if dir == Vec2::ZERO {
            (-rel).normalized()
        } else {
            // Keep to the right of oncoming bodies; dodge away from side ones.
            let right = -dir.perp();
            let side = dir.cross(rel);
            if side < -1e-9 {
                -right
            } else {
                right
            }
        };
        push = push + away;
    }
    let repulsion = if push == Vec2::ZERO {
        Vec2::ZERO
    } else {
        push.normalized() * (0.5 * step)
    };
    let mut full = desired + repulsion;
    if full.length() > step {
        full = full.normalized() * step;
    }

    let squeeze = ped.stalled >= SQUEEZE_TICKS;
    let acceptable = |mv: Vec2| -> bool {
        let q = pos + mv;
        if !(ctx.walkable)(agent.level, q) {
            return false;
        }
        squeeze
            || others(agent.id, agent.level, ctx.bodies).all(|b| {
                let before = pos.distance(b.position);
                let after = q.distance(b.position);
                after >= lim_of(b) || after >= before
            })
    };
    // Axis-split moves let a walker slide along an edge when the straight
    // move would clip a corner of the walkable area.
    let slide_x = Vec2::new(desired.x, 0.0);
    let slide_y = Vec2::new(0.0, desired.y);
    // Turned moves toward the dodge side get a walker round a body in its way.
    let side = if dir.cross(push) < 0.0 { -1.0 } else { 1.0 };
    let turned = |deg: f64| {
        let (sin, cos) = (side * deg.to_radians()).sin_cos();
        Vec2::new(
            desired.x * cos - desired.y * sin,
            desired.x * sin + desired.y * cos,
        )
    };
    let candidates = if squeeze {
        vec![desired, full, desired * 0.5, repulsion, slide_x, slide_y]
    } else if push == Vec2::ZERO {
        vec![full, full * 0.5, full * 0.25, slide_x, slide_y]
    } else {
        vec![
            full,
            turned(30.0),
            turned(60.0),
            full * 0.5,
            turned(90.0),
            full * 0.25,
            repulsion,
            slide_x,
            slide_y,
        ]
    };
    let chosen = candidates
        .into_iter()
        .find(|&mv| mv != Vec2::ZERO && acceptable(mv))
        .unwrap_or(Vec2::ZERO);
    agent.position = pos + chosen;
    agent.speed = chosen.length() / ctx.dt;
    if agent.speed > ped.max_speed {
        agent.speed = ped.max_speed;
    }
    if chosen.length() < STALL_FRACTION * desired.length().min(step) || chosen == Vec2::ZERO {
        ped.stalled += 1;
        if ped.stalled >= GIVE_UP_TICKS {
            ped.mode = PedMode::Arrived;
            return;
        }
    } else {
        ped.stalled = 0;
    }

    if agent.position.distance(target) <= WAYPOINT_TOLERANCE {
        agent.route_index += 1;
        if let (Some(&a), Some(&b)) = (
            agent.route.get(agent.route_index - 1),
            agent.route.get(agent.route_index),
        ) {
            if ctx.graph.node(b).level != ctx.graph.node(a).level {
                if let Some(e) = ctx.graph.out_edges(a).find(|e| e.to == b) {
                    ped.mode = PedMode::Connector {
                        connector: e.requires_operational_connector.clone().unwrap_or_default(),
                        remaining: connector_ticks(e.length, ped.max_speed, ctx.dt),
                    };
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentBody;
    use crate::site::{Edge, NavMode, NavNode};
    use std::collections::BTreeSet;

    fn line_graph(n: u32) -> NavGraph {
        let nodes = (0..n)
            .map(|i| NavNode {
                level: 0,
                position: Vec2::new(i as f64 * 0.5, 0.0),
            })
            .collect();
        let mut edges = Vec::new();
        for i in 0..n - 1 {
            edges.push(Edge::new(i, i + 1, 0.5, None));
            edges.push(Edge::new(i + 1, i, 0.5, None));
        }
        NavGraph::from_parts(NavMode::Walk, nodes, edges)
    }

    fn walker(id: AgentId, at: Vec2, goal: u32, speed: f64) -> AgentState {
        AgentState {
            id,
            archetype: 0,
            level: 0,
            position: at,
            speed: 0.0,
            route: vec![],
            route_index: 0,
            body: AgentBody::Pedestrian(PedestrianState {
                cyclist: false,
                radius: 0.3,
                max_speed: speed,
                goal: "g".into(),
                goal_node: goal,
                repath_cooldown: 0,
                stalled: 0,
                mode: PedMode::Walking,
            }),
        }
    }

    #[test]
    fn lone_walker_moves_one_step() {
        let g = line_graph(21);
        let field = DistanceField::toward(&g, 20, &BTreeSet::new());
        let mut a = walker(1, Vec2::new(0.0, 0.0), 20, 1.4);
        let walkable = |_: LevelId, _: Vec2| true;
        let nowhere = |_: LevelId, _: Vec2| false;
        let ctx = PedContext {
            graph: &g,
            field: &field,
            bodies: &[],
            walkable: &walkable,
            in_goal_area: &nowhere,
            goal_is_stop: false,
            dt: 0.05,
            margin: 0.1,
            repath_ticks: 40,
        };
        assert!(repath(&mut a, &ctx));
        a.route_index = 1;
        pedestrian_step(&mut a, &ctx);
        assert!((a.position.x - 0.07).abs() < 1e-12);
        assert!((a.speed - 1.4).abs() < 1e-9);
    }

    #[test]
    fn at_goal_only_flags_arrival() {
        let g = line_graph(3);
        let field = DistanceField::toward(&g, 2, &BTreeSet::new());
        let mut a = walker(1, Vec2::new(1.0, 0.0), 2, 1.4);
        a.route = vec![2];
        a.route_index = 1;
        let yes = |_: LevelId, _: Vec2| true;
        let no = |_: LevelId, _: Vec2| false;
        let ctx = PedContext {
            graph: &g,
            field: &field,
            bodies: &[],
            walkable: &yes,
            in_goal_area: &no,
            goal_is_stop: false,
            dt: 0.05,
            margin: 0.1,
            repath_ticks: 40,
        };
        pedestrian_step(&mut a, &ctx);
        assert_eq!(a.position, Vec2::new(1.0, 0.0));
        assert_eq!(a.pedestrian().unwrap().mode, PedMode::Arrived);
    }
}
