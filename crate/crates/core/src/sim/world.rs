use super::{Canonical, Event, EventBody, InputFrame, SimConfig, SimRng};
use crate::agents::pedestrian::{pedestrian_step, Body, PedContext};
use crate::agents::vehicle::{vehicle_step, RoadNet, VehicleView};
use crate::agents::{
    AgentBody, AgentId, AgentKind, AgentState, ArchetypeCatalog, LineTimetable, PedMode,
    PedestrianState, RunId, SignalPrograms, TramState, TransitSchedule, VehicleState,
};
use crate::avatar::{avatar_step, AvatarState, Surroundings};
use crate::geometry::{Polygon, Vec2};
use crate::site::{
    build_nav_graph, build_walk_graph_with, DistanceField, FeatureKind, FeatureProps, LevelId,
    NavError, NavGraph, NavMode, NodeId, SignalColor, SiteMap, SpawnAgent,
};
use crate::tour::{
    advance_tour, apply_resolution, init_tour, BarrierPhase, BarrierScenario, MutationRecord,
    PathPoint, RuntimeGeometry, TourError, TourState,
};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use thiserror::Error;

/// Everything a world is built from.
#[derive(Debug, Clone)]
pub struct SimInputs {
    pub site: SiteMap,
    pub scenario: BarrierScenario,
    pub schedule: TransitSchedule,
    pub catalog: ArchetypeCatalog,
    pub config: SimConfig,
}

#[derive(Debug, Clone)]
struct SpawnSite {
    id: String,
    agent: SpawnAgent,
    rate: f64,
    level: LevelId,
    lane: Option<String>,
    polygon: Vec<Vec2>,
    goals: Vec<String>,
}

/// Immutable data derived from the inputs, shared by every world built
/// from them.
#[derive(Debug)]
pub struct SimContext {
    pub inputs: SimInputs,
    pub road: RoadNet,
    pub road_graph: Option<NavGraph>,
    pub tram_graph: Option<NavGraph>,
    pub walk_graph: Arc<NavGraph>,
    pub programs: SignalPrograms,
    pub timetables: Vec<LineTimetable>,
    pub broken: BTreeSet<String>,
    spawn_sites: Vec<SpawnSite>,
    /// Goal feature id to `(level, polygon, is_stop)`.
    goal_areas: BTreeMap<String, (LevelId, Vec<Vec2>, bool)>,
}

impl SimContext {
    pub fn new(inputs: SimInputs) -> Result<SimContext, NavError> {
        let site = &inputs.site;
        let walk_graph = Arc::new(build_nav_graph(site, NavMode::Walk)?);
        let road_graph = build_nav_graph(site, NavMode::Road).ok();
        let tram_graph = build_nav_graph(site, NavMode::Tram).ok();
        let timetables = inputs
            .schedule
            .lines
            .iter()
            .filter_map(|l| {
                LineTimetable::build(l, site, &inputs.catalog, inputs.config.tick_hz as u64)
            })
            .collect();
        let mut spawn_sites: Vec<SpawnSite> = site
            .features
            .iter()
            .filter_map(|f| match &f.props {
                FeatureProps::SpawnPoint(p) => Some(SpawnSite {
                    id: f.id.clone(),
                    agent: p.agent,
                    rate: p.rate,
                    level: f.level,
                    lane: p.lane.clone(),
                    polygon: f.geometry.vertices().to_vec(),
                    goals: p.goals.clone(),
                }),
                _ => None,
            })
            .collect();
        spawn_sites.sort_by(|a, b| a.id.cmp(&b.id));
        let goal_areas = site
            .features
            .iter()
            .filter(|f| matches!(f.kind(), FeatureKind::Stop | FeatureKind::SpawnPoint))
            .map(|f| {
                (
                    f.id.clone(),
                    (
                        f.level,
                        f.geometry.vertices().to_vec(),
                        f.kind() == FeatureKind::Stop,
                    ),
                )
            })
            .collect();
        Ok(SimContext {
            road: RoadNet::from_site(site),
            road_graph,
            tram_graph,
            walk_graph,
            programs: SignalPrograms::from_site(site),
            timetables,
            broken: site.broken_connectors(),
            spawn_sites,
            goal_areas,
            inputs,
        })
    }

    pub fn site(&self) -> &SiteMap {
        &self.inputs.site
    }

    pub fn config(&self) -> &SimConfig {
        &self.inputs.config
    }

    pub fn scenario(&self) -> &BarrierScenario {
        &self.inputs.scenario
    }
}

/// Complete mutable state of a world at a tick. Everything here is hashed
/// except the derived guided path.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub tick: u64,
    pub dt: f64,
    pub rng: SimRng,
    pub agents: BTreeMap<AgentId, AgentState>,
    pub avatar: AvatarState,
    pub signals: BTreeMap<String, SignalColor>,
    pub tour: TourState,
    pub mutations_applied: Vec<MutationRecord>,
    pub runtime: RuntimeGeometry,
    pub event_queue: Vec<Event>,
    pub next_agent_id: AgentId,
}

/// Per-tick update counters, for auditing phase totality.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub vehicles_updated: usize,
    pub pedestrians_updated: usize,
    pub trams_updated: usize,
    pub vehicles: usize,
    pub pedestrians: usize,
    pub trams: usize,
    pub graph_rebuilt: bool,
}

#[derive(Debug, Clone)]
struct Caches {
    walk: Arc<NavGraph>,
    goal_nodes: BTreeMap<String, Option<NodeId>>,
    goal_fields: BTreeMap<String, Arc<DistanceField>>,
    spawn_nodes: BTreeMap<String, Vec<NodeId>>,
    tour_field: Option<(usize, Arc<DistanceField>)>,
    obstacles: Vec<(String, LevelId, Vec<Vec2>)>,
}

#[derive(Debug, Clone)]
pub struct World {
    pub ctx: Arc<SimContext>,
    pub state: WorldState,
    pub stats: StepStats,
    caches: Caches,
}

#[derive(Debug, Error, PartialEq)]
pub enum InitError {
    #[error("start pose is not on a walkable surface clear of obstacles")]
    StartPoseInvalid,
    #[error(transparent)]
    Tour(#[from] TourError),
}

#[derive(Debug, Error, PartialEq)]
pub enum StepError {
    #[error("input frame for tick {got} given to world at tick {expected}")]
    TickMismatch { expected: u64, got: u64 },
}

pub fn init_world(ctx: Arc<SimContext>, seed: u64) -> Result<World, InitError> {
    World::new(ctx, seed)
}

impl World {
    pub fn new(ctx: Arc<SimContext>, seed: u64) -> Result<World, InitError> {
        let cfg = ctx.config().clone();
        let pose = &ctx.scenario().start_pose;
        let avatar = AvatarState::new(
            pose.level,
            pose.position,
            pose.heading,
            cfg.avatar_speed,
            cfg.avatar_radius,
        );
        let runtime = RuntimeGeometry::from_site(ctx.site());
        let obstacles = runtime.obstacle_footprints(ctx.site());
        let env = Surroundings {
            site: ctx.site(),
            obstacles: &obstacles,
            dt: cfg.dt(),
        };
        if !pose.heading.is_multiple_of(45)
            || !env.clear(pose.level, pose.position, cfg.avatar_radius)
        {
            return Err(InitError::StartPoseInvalid);
        }
        let tour = init_tour(
            ctx.scenario(),
            &ctx.walk_graph,
            pose.level,
            pose.position,
            &ctx.broken,
        )?;
        let state = WorldState {
            tick: 0,
            dt: cfg.dt(),
            rng: SimRng::seed_from_u64(seed),
            agents: BTreeMap::new(),
            avatar,
            signals: BTreeMap::new(),
            tour,
            mutations_applied: Vec::new(),
            runtime,
            event_queue: Vec::new(),
            next_agent_id: 0,
        };
        let caches = Caches {
            walk: ctx.walk_graph.clone(),
            goal_nodes: BTreeMap::new(),
            goal_fields: BTreeMap::new(),
            spawn_nodes: BTreeMap::new(),
            tour_field: None,
            obstacles,
        };
        Ok(World {
            ctx,
            state,
            stats: StepStats::default(),
            caches,
        })
    }

    pub fn walk_graph(&self) -> &NavGraph {
        &self.caches.walk
    }

    pub fn obstacle_footprints(&self) -> &[(String, LevelId, Vec<Vec2>)] {
        &self.caches.obstacles
    }

    pub fn hash(&self) -> u64 {
        state_hash(&self.state)
    }

    /// Advance one tick. Returns the events of the tick.
    pub fn step(&mut self, input: &InputFrame) -> Result<&[Event], StepError> {
        if input.tick != self.state.tick {
            return Err(StepError::TickMismatch {
                expected: self.state.tick,
                got: input.tick,
            });
        }
        let input = input.clamped();
        self.state.event_queue.clear();
        self.stats = StepStats::default();

        self.phase_spawn();
        self.phase_signals();
        let departed = self.phase_transit();
        self.phase_vehicles();
        self.phase_pedestrians();
        self.phase_avatar(&input);
        self.phase_tour(input.act);
        // Population that went through the update phases.
        for a in self.state.agents.values() {
            match a.kind() {
                AgentKind::Vehicle => self.stats.vehicles += 1,
                AgentKind::Pedestrian => self.stats.pedestrians += 1,
                AgentKind::Tram => self.stats.trams += 1,
            }
        }
        self.phase_despawn(&departed);
        self.state.tick += 1;
        Ok(&self.state.event_queue)
    }

    fn emit(&mut self, body: EventBody) {
        self.state.event_queue.push(Event {
            tick: self.state.tick,
            body,
        });
    }

    fn new_id(&mut self) -> AgentId {
        let id = self.state.next_agent_id;
        self.state.next_agent_id += 1;
        id
    }

    fn goal_node(&mut self, goal: &str) -> Option<NodeId> {
        if let Some(n) = self.caches.goal_nodes.get(goal) {
            return *n;
        }
        let node = self.ctx.goal_areas.get(goal).and_then(|(level, poly, _)| {
            let p = Polygon(poly);
            self.caches.walk.nearest_node_in(*level, &p, p.centroid())
        });
        self.caches.goal_nodes.insert(goal.to_string(), node);
        node
    }

    fn goal_field(&mut self, goal: &str) -> Option<Arc<DistanceField>> {
        if let Some(f) = self.caches.goal_fields.get(goal) {
            return Some(f.clone());
        }
        let node = self.goal_node(goal)?;
        let field = Arc::new(DistanceField::toward(
            &self.caches.walk,
            node,
            &self.ctx.broken,
        ));
        self.caches
            .goal_fields
            .insert(goal.to_string(), field.clone());
        Some(field)
    }

    fn spawn_nodes(&mut self, site_id: &str, level: LevelId, poly: &[Vec2]) -> &[NodeId] {
        if !self.caches.spawn_nodes.contains_key(site_id) {
            let g = &self.caches.walk;
            let p = Polygon(poly);
            let nodes = (0..g.node_count() as NodeId)
                .filter(|&n| {
                    let node = g.node(n);
                    node.level == level && p.contains(node.position)
                })
                .collect();
            self.caches.spawn_nodes.insert(site_id.to_string(), nodes);
        }
        &self.caches.spawn_nodes[site_id]
    }

    fn bodies(&self) -> Vec<Body> {
        let mut out: Vec<Body> = self
            .state
            .agents
            .values()
            .filter_map(|a| match &a.body {
                AgentBody::Pedestrian(p) if !matches!(p.mode, PedMode::Connector { .. }) => {
                    Some(Body {
                        id: Some(a.id),
                        level: a.level,
                        position: a.position,
                        radius: p.radius,
                    })
                }
                _ => None,
            })
            .collect();
        let av = &self.state.avatar;
        if av.in_transit.is_none() {
            out.push(Body {
                id: None,
                level: av.level,
                position: av.position,
                radius: av.radius,
            });
        }
        out
    }

    fn walkable(&self, level: LevelId, p: Vec2) -> bool {
        self.ctx.site().is_on_walk_surface(level, p)
            && self
                .caches
                .obstacles
                .iter()
                .all(|(_, l, v)| *l != level || !Polygon(v).contains(p))
    }

    // Phase 1.
    fn phase_spawn(&mut self) {
        let ctx = self.ctx.clone();
        let dt = self.state.dt;
        let scale = ctx.config().spawn_rate_scale;
        for sp in &ctx.spawn_sites {
            if !self.state.rng.chance(sp.rate * scale * dt) {
                continue;
            }
            match sp.agent {
                SpawnAgent::Vehicle => self.spawn_vehicle(sp),
                SpawnAgent::Pedestrian | SpawnAgent::Cyclist => self.spawn_pedestrian(sp),
            }
        }
        let tick = self.state.tick + 1;
        for (li, tt) in ctx.timetables.iter().enumerate() {
            for run in tt.runs_starting(tick) {
                self.spawn_tram(li, run);
            }
        }
    }

    fn spawn_vehicle(&mut self, sp: &SpawnSite) {
        let ctx = self.ctx.clone();
        let catalog = &ctx.inputs.catalog;
        if catalog.vehicles.is_empty() {
            return;
        }
        let archetype = self.state.rng.below(catalog.vehicles.len() as u64) as u32;
        let Some(lane_id) = sp.lane.as_deref() else {
            return;
        };
        let Some(lane) = ctx.road.lane(lane_id) else {
            return;
        };
        let arch = &catalog.vehicles[archetype as usize];
        let desired = arch.max_speed.min(lane.speed_limit);
        let cfg = ctx.config();
        let need = cfg.min_gap.max(cfg.time_gap * desired);
        let entry_free = self.state.agents.values().all(|a| match &a.body {
            AgentBody::Vehicle(v) if v.lane == lane_id => v.s - v.length >= need,
            _ => true,
        });
        if !entry_free {
            return;
        }
        let id = self.new_id();
        let route = ctx
            .road_graph
            .as_ref()
            .map(|g| g.lane_nodes(lane_id).iter().map(|&(_, n)| n).collect())
            .unwrap_or_default();
        let position = lane.line.point_at(0.0);
        self.state.agents.insert(
            id,
            AgentState {
                id,
                archetype,
                level: lane.level,
                position,
                speed: desired,
                route,
                route_index: 1,
                body: AgentBody::Vehicle(VehicleState {
                    lane: lane_id.to_string(),
                    s: 0.0,
                    length: arch.length,
                    desired_speed: desired,
                    blocked_ticks: 0,
                    done: false,
                }),
            },
        );
        self.emit(EventBody::AgentSpawned {
            agent_id: id,
            agent: AgentKind::Vehicle,
            archetype,
            level: lane.level,
            position,
        });
    }

    fn spawn_pedestrian(&mut self, sp: &SpawnSite) {
        let ctx = self.ctx.clone();
        let cyclist = sp.agent == SpawnAgent::Cyclist;
        let list = if cyclist {
            &ctx.inputs.catalog.cyclists
        } else {
            &ctx.inputs.catalog.pedestrians
        };
        if list.is_empty() || sp.goals.is_empty() {
            return;
        }
        let archetype = self.state.rng.below(list.len() as u64) as u32;
        let goal = sp.goals[self.state.rng.below(sp.goals.len() as u64) as usize].clone();
        let nodes = self.spawn_nodes(&sp.id, sp.level, &sp.polygon).to_vec();
        if nodes.is_empty() {
            return;
        }
        let start = nodes[self.state.rng.below(nodes.len() as u64) as usize];
        let arch = &list[archetype as usize];
        let position = self.caches.walk.node(start).position;
        let clear = self.bodies().iter().all(|b| {
            b.level != sp.level || b.position.distance(position) >= b.radius + arch.radius
        });
        if !clear || !self.walkable(sp.level, position) {
            return;
        }
        let (Some(goal_node), Some(field)) = (self.goal_node(&goal), self.goal_field(&goal)) else {
            return;
        };
        let Some(path) = field.path_from(&self.caches.walk, start) else {
            return;
        };
        let id = self.new_id();
        self.state.agents.insert(
            id,
            AgentState {
                id,
                archetype,
                level: sp.level,
                position,
                speed: 0.0,
                route: path.nodes,
                route_index: 0,
                body: AgentBody::Pedestrian(PedestrianState {
                    cyclist,
                    radius: arch.radius,
                    max_speed: arch.walk_speed,
                    goal,
                    goal_node,
                    repath_cooldown: 0,
                    stalled: 0,
                    mode: PedMode::Walking,
                }),
            },
        );
        self.emit(EventBody::AgentSpawned {
            agent_id: id,
            agent: AgentKind::Pedestrian,
            archetype,
            level: sp.level,
            position,
        });
    }

    fn spawn_tram(&mut self, line: usize, run: RunId) {
        let ctx = self.ctx.clone();
        let tt = &ctx.timetables[line];
        let tick = self.state.tick + 1;
        let (s, speed) = tt.position(run, tick);
        let level = ctx
            .site()
            .feature(&ctx.inputs.schedule.lines[line].track)
            .map_or(0, |f| f.level);
        let id = self.new_id();
        let route = ctx
            .tram_graph
            .as_ref()
            .map(|g| {
                g.lane_nodes(&ctx.inputs.schedule.lines[line].track)
                    .iter()
                    .map(|&(_, n)| n)
                    .collect()
            })
            .unwrap_or_default();
        let position = tt.track.point_at(s);
        self.state.agents.insert(
            id,
            AgentState {
                id,
                archetype: tt.archetype,
                level,
                position,
                speed,
                route,
                route_index: 0,
                body: AgentBody::Tram(TramState {
                    line: tt.line.clone(),
                    run,
                    s,
                    next_stop: 0,
                    dwell_remaining: 0.0,
                    done: false,
                }),
            },
        );
        self.emit(EventBody::AgentSpawned {
            agent_id: id,
            agent: AgentKind::Tram,
            archetype: tt.archetype,
            level,
            position,
        });
    }

    // Phase 2.
    fn phase_signals(&mut self) {
        let t = self.state.tick as f64 * self.state.dt;
        self.state.signals = self
            .ctx
            .programs
            .0
            .iter()
            .map(|(id, p)| (id.clone(), p.color_at(t)))
            .collect();
    }

    // Phase 3. Returns the stops departed from on this tick.
    fn phase_transit(&mut self) -> BTreeSet<String> {
        let ctx = self.ctx.clone();
        let tick = self.state.tick + 1;
        let dt = self.state.dt;
        let mut departed = BTreeSet::new();
        let mut events = Vec::new();
        for a in self.state.agents.values_mut() {
            let AgentBody::Tram(t) = &mut a.body else {
                continue;
            };
            let Some(tt) = ctx.timetables.iter().find(|tt| tt.line == t.line) else {
                continue;
            };
            self.stats.trams_updated += 1;
            let (s, speed) = tt.position(t.run, tick);
            t.s = s;
            a.speed = speed;
            a.position = tt.track.point_at(s);
            while a.route_index + 1 < a.route.len()
                && ctx.tram_graph.as_ref().is_some_and(|g| {
                    tt.track
                        .project(g.node(a.route[a.route_index + 1]).position)
                        <= s
                })
            {
                a.route_index += 1;
            }
            t.dwell_remaining = 0.0;
            t.next_stop = tt.stops.len();
            for (i, (stop, _)) in tt.stops.iter().enumerate() {
                let arr = tt.arrival(t.run, i);
                let dep = tt.departure(t.run, i);
                if arr == tick {
                    events.push(EventBody::TransitArrived {
                        agent_id: a.id,
                        line: t.line.clone(),
                        stop: stop.clone(),
                    });
                }
                if dep == tick {
                    departed.insert(stop.clone());
                    events.push(EventBody::TransitDeparted {
                        agent_id: a.id,
                        line: t.line.clone(),
                        stop: stop.clone(),
                    });
                }
                if tick >= arr && tick < dep {
                    t.dwell_remaining = (dep - tick) as f64 * dt;
                }
                if arr > tick && t.next_stop == tt.stops.len() {
                    t.next_stop = i;
                }
            }
            if tick >= tt.end_tick(t.run) {
                t.done = true;
            }
        }
        for e in events {
            self.emit(e);
        }
        departed
    }

    // Phase 4.
    fn phase_vehicles(&mut self) {
        let ctx = self.ctx.clone();
        let cfg = ctx.config();
        let mut traffic: Vec<VehicleView> = self
            .state
            .agents
            .values()
            .filter_map(|a| {
                let v = a.vehicle()?;
                Some(VehicleView {
                    id: a.id,
                    lane: ctx.road.index_of(&v.lane)?,
                    s: v.s,
                    length: v.length,
                    speed: a.speed,
                })
            })
            .collect();
        let ids: Vec<AgentId> = traffic.iter().map(|v| v.id).collect();
        for (k, id) in ids.into_iter().enumerate() {
            let a = self.state.agents.get_mut(&id).expect("vehicle exists");
            let AgentBody::Vehicle(v) = &mut a.body else {
                continue;
            };
            let arch = &ctx.inputs.catalog.vehicles[a.archetype as usize];
            let old_lane = v.lane.clone();
            let event = vehicle_step(
                id,
                v,
                &mut a.speed,
                arch,
                &traffic,
                &ctx.road,
                &self.state.signals,
                cfg,
            );
            let lane = ctx.road.lane(&v.lane).expect("lane exists");
            a.position = lane.line.point_at(v.s);
            if v.lane != old_lane {
                a.route = ctx
                    .road_graph
                    .as_ref()
                    .map(|g| g.lane_nodes(&v.lane).iter().map(|&(_, n)| n).collect())
                    .unwrap_or_default();
            }
            if let Some(g) = ctx.road_graph.as_ref() {
                let nodes = g.lane_nodes(&v.lane);
                a.route_index = nodes.iter().take_while(|(s, _)| *s <= v.s).count();
            }
            traffic[k] = VehicleView {
                id,
                lane: ctx.road.index_of(&v.lane).expect("lane exists"),
                s: v.s,
                length: v.length,
                speed: a.speed,
            };
            self.stats.vehicles_updated += 1;
            if let Some(e) = event {
                self.emit(e);
            }
        }
    }

    // Phase 5.
    fn phase_pedestrians(&mut self) {
        let ctx = self.ctx.clone();
        let cfg = ctx.config();
        let ids: Vec<AgentId> = self
            .state
            .agents
            .values()
            .filter(|a| a.kind() == AgentKind::Pedestrian)
            .map(|a| a.id)
            .collect();
        let mut bodies = self.bodies();
        let repath_ticks = cfg.ticks_for(cfg.repath_cooldown) as u32;
        for id in ids {
            let goal = self.state.agents[&id]
                .pedestrian()
                .map(|p| p.goal.clone())
                .unwrap_or_default();
            let Some(field) = self.goal_field(&goal) else {
                continue;
            };
            let (glevel, gpoly, is_stop) = ctx.goal_areas[&goal].clone();
            let in_goal =
                move |level: LevelId, p: Vec2| level == glevel && Polygon(&gpoly).contains(p);
            let mut agent = self.state.agents.remove(&id).expect("pedestrian exists");
            {
                let walkable = |level: LevelId, p: Vec2| self.walkable(level, p);
                let pctx = PedContext {
                    graph: &self.caches.walk,
                    field: &field,
                    bodies: &bodies,
                    walkable: &walkable,
                    in_goal_area: &in_goal,
                    goal_is_stop: is_stop,
                    dt: self.state.dt,
                    margin: cfg.separation_margin,
                    repath_ticks,
                };
                pedestrian_step(&mut agent, &pctx);
            }
            let in_connector = matches!(
                agent.pedestrian().map(|p| &p.mode),
                Some(PedMode::Connector { .. })
            );
            if let Some(b) = bodies.iter_mut().find(|b| b.id == Some(id)) {
                b.level = agent.level;
                b.position = agent.position;
                if in_connector {
                    b.level = LevelId::MIN;
                }
            } else if !in_connector {
                let radius = agent.pedestrian().map_or(0.3, |p| p.radius);
                bodies.push(Body {
                    id: Some(id),
                    level: agent.level,
                    position: agent.position,
                    radius,
                });
            }
            self.state.agents.insert(id, agent);
            self.stats.pedestrians_updated += 1;
        }
    }

    // Phase 6.
    fn phase_avatar(&mut self, input: &InputFrame) {
        let env = Surroundings {
            site: self.ctx.site(),
            obstacles: &self.caches.obstacles,
            dt: self.state.dt,
        };
        avatar_step(&mut self.state.avatar, input, &env);
    }

    // Phase 7.
    fn phase_tour(&mut self, act: bool) {
        let ctx = self.ctx.clone();
        let mut rebuild = false;
        if !self.state.runtime.animations.is_empty() {
            rebuild = self.state.runtime.advance_animations();
            self.caches.obstacles = self.state.runtime.obstacle_footprints(ctx.site());
        }
        let before = self.state.tour.target_index;
        let tick = self.state.tick;
        let av = self.state.avatar.clone();
        let events = {
            let state = &mut self.state;
            let walk = &self.caches.walk;
            let mut resolve = |b: &crate::tour::BarrierDef| {
                let rec = apply_resolution(
                    &b.id,
                    b.level,
                    &b.resolution,
                    tick,
                    ctx.config().tick_hz,
                    &mut state.runtime,
                    &state.mutations_applied,
                    ctx.site(),
                    walk,
                    &ctx.broken,
                )?;
                state.mutations_applied.push(rec.clone());
                Ok(rec)
            };
            advance_tour(
                &mut state.tour,
                ctx.scenario(),
                av.level,
                av.position,
                act,
                &mut resolve,
            )
        };
        for e in events {
            self.emit(e);
        }
        if rebuild {
            self.rebuild_walk_graph();
        }
        let target_changed = self.state.tour.target_index != before;
        self.update_guided_path(target_changed || rebuild);
    }

    fn rebuild_walk_graph(&mut self) {
        let ctx = self.ctx.clone();
        let Ok(graph) = build_walk_graph_with(ctx.site(), &self.state.runtime.obstacle_offsets)
        else {
            return;
        };
        let old = std::mem::replace(&mut self.caches.walk, Arc::new(graph));
        self.caches.goal_nodes.clear();
        self.caches.goal_fields.clear();
        self.caches.spawn_nodes.clear();
        self.caches.tour_field = None;
        self.stats.graph_rebuilt = true;
        let new = self.caches.walk.clone();
        let remap = |n: NodeId| {
            let node = old.node(n);
            new.node_at(node.level, node.position)
                .or_else(|| new.nearest_node(node.level, node.position))
                .unwrap_or(0)
        };
        let ids: Vec<AgentId> = self.state.agents.keys().copied().collect();
        for id in ids {
            let goal = match self.state.agents[&id].pedestrian() {
                Some(p) => p.goal.clone(),
                None => continue,
            };
            let goal_node = self.goal_node(&goal);
            let a = self.state.agents.get_mut(&id).expect("agent exists");
            a.route = a.route.iter().map(|&n| remap(n)).collect();
            if let (AgentBody::Pedestrian(p), Some(g)) = (&mut a.body, goal_node) {
                p.goal_node = g;
                if p.mode == PedMode::Walking {
                    // Force a fresh route on the next update.
                    a.route_index = a.route.len();
                    a.route.clear();
                }
            }
        }
    }

    fn update_guided_path(&mut self, force: bool) {
        let tour = &self.state.tour;
        if tour.completed {
            self.state.tour.guided_path.clear();
            return;
        }
        let av = &self.state.avatar;
        let snap = self.caches.walk.nearest_node(av.level, av.position);
        if !force && snap == tour.snap_node && !tour.guided_path.is_empty() {
            return;
        }
        let idx = tour.target_index;
        let field = match &self.caches.tour_field {
            Some((i, f)) if *i == idx => f.clone(),
            _ => {
                let b = &self.ctx.scenario().barriers[idx];
                let Some(target) = crate::tour::trigger_node(&self.caches.walk, b) else {
                    return;
                };
                let f = Arc::new(DistanceField::toward(
                    &self.caches.walk,
                    target,
                    &self.ctx.broken,
                ));
                self.caches.tour_field = Some((idx, f.clone()));
                f
            }
        };
        let path = snap
            .and_then(|s| field.path_from(&self.caches.walk, s))
            .map(|p| {
                p.nodes
                    .iter()
                    .map(|&n| PathPoint::of(self.caches.walk.node(n)))
                    .collect()
            })
            .unwrap_or_default();
        self.state.tour.snap_node = snap;
        self.state.tour.guided_path = path;
    }

    // Phase 8.
    fn phase_despawn(&mut self, departed: &BTreeSet<String>) {
        let gone: Vec<(AgentId, AgentKind)> = self
            .state
            .agents
            .values()
            .filter(|a| match &a.body {
                AgentBody::Vehicle(v) => v.done,
                AgentBody::Tram(t) => t.done,
                AgentBody::Pedestrian(p) => match p.mode {
                    PedMode::Arrived => true,
                    PedMode::AtStop => departed.contains(&p.goal),
                    _ => false,
                },
            })
            .map(|a| (a.id, a.kind()))
            .collect();
        for (id, kind) in gone {
            self.state.agents.remove(&id);
            self.emit(EventBody::AgentDespawned {
                agent_id: id,
                agent: kind,
            });
        }
    }

    /// Phase of each barrier, for views.
    pub fn barrier_phases(&self) -> &[BarrierPhase] {
        &self.state.tour.phases
    }
}

fn color_code(c: SignalColor) -> u8 {
    match c {
        SignalColor::Green => 0,
        SignalColor::Yellow => 1,
        SignalColor::Red => 2,
    }
}

fn phase_code(p: BarrierPhase) -> u8 {
    match p {
        BarrierPhase::Guided => 0,
        BarrierPhase::Approached => 1,
        BarrierPhase::Resolved => 2,
    }
}

fn write_agent(c: &mut Canonical, a: &AgentState) {
    let kind = match a.kind() {
        AgentKind::Vehicle => 0,
        AgentKind::Pedestrian => 1,
        AgentKind::Tram => 2,
    };
    c.u64(a.id)
        .u8(kind)
        .u64(a.archetype as u64)
        .i64(a.level as i64)
        .vec2(a.position)
        .real(a.speed)
        .u64(a.route.len() as u64);
    for &n in &a.route {
        c.u64(n as u64);
    }
    c.u64(a.route_index as u64);
    match &a.body {
        AgentBody::Vehicle(v) => {
            c.str(&v.lane)
                .real(v.s)
                .real(v.length)
                .real(v.desired_speed)
                .u64(v.blocked_ticks as u64)
                .bool(v.done);
        }
        AgentBody::Pedestrian(p) => {
            c.bool(p.cyclist)
                .real(p.radius)
                .real(p.max_speed)
                .str(&p.goal)
                .u64(p.goal_node as u64)
                .u64(p.repath_cooldown as u64)
                .u64(p.stalled as u64);
            match &p.mode {
                PedMode::Walking => {
                    c.u8(0);
                }
                PedMode::Connector {
                    connector,
                    remaining,
                } => {
                    c.u8(1).str(connector).u64(*remaining as u64);
                }
                PedMode::AtStop => {
                    c.u8(2);
                }
                PedMode::Arrived => {
                    c.u8(3);
                }
            }
        }
        AgentBody::Tram(t) => {
            c.str(&t.line)
                .u64(t.run.offset as u64)
                .u64(t.run.cycle)
                .real(t.s)
                .u64(t.next_stop as u64)
                .real(t.dwell_remaining)
                .bool(t.done);
        }
    }
}

/// Canonical serialization of the hashed part of a world state.
pub fn canonical_bytes(s: &WorldState) -> Vec<u8> {
    let mut c = Canonical::new();
    c.u64(s.tick).real(s.dt);
    for w in s.rng.state() {
        c.u64(w);
    }
    c.u64(s.agents.len() as u64);
    for a in s.agents.values() {
        write_agent(&mut c, a);
    }
    let av = &s.avatar;
    c.i64(av.level as i64)
        .vec2(av.position)
        .u64(av.heading as u64)
        .real(av.speed_cap)
        .real(av.radius)
        .bool(av.rot_latch);
    match &av.in_transit {
        Some(t) => {
            c.bool(true).str(&t.connector).u64(t.remaining_ticks as u64);
        }
        None => {
            c.bool(false);
        }
    }
    c.opt_str(av.last_connector.as_deref());
    c.u64(s.signals.len() as u64);
    for (id, color) in &s.signals {
        c.str(id).u8(color_code(*color));
    }
    let t = &s.tour;
    c.u64(t.target_index as u64).u64(t.phases.len() as u64);
    for p in &t.phases {
        c.u8(phase_code(*p));
    }
    c.u64(t.cued.len() as u64);
    for &q in &t.cued {
        c.bool(q);
    }
    c.bool(t.completed);
    c.u64(s.mutations_applied.len() as u64);
    for m in &s.mutations_applied {
        c.str(&m.barrier).u64(m.tick);
    }
    let rt = &s.runtime;
    c.u64(rt.strips.len() as u64);
    for (id, pieces) in &rt.strips {
        c.str(id).u64(pieces.len() as u64);
        for piece in pieces {
            c.u64(piece.len() as u64);
            for &p in piece {
                c.vec2(p);
            }
        }
    }
    c.u64(rt.obstacle_offsets.len() as u64);
    for (id, off) in &rt.obstacle_offsets {
        c.str(id).vec2(*off);
    }
    c.u64(rt.animations.len() as u64);
    for a in &rt.animations {
        c.str(&a.obstacle)
            .vec2(a.from)
            .vec2(a.to)
            .u64(a.elapsed as u64)
            .u64(a.ticks as u64);
    }
    c.u64(s.event_queue.len() as u64);
    for e in &s.event_queue {
        c.str(&serde_json::to_string(e).expect("event serializes"));
    }
    c.u64(s.next_agent_id);
    c.bytes
}

/// FNV-1a 64 over the canonical serialization.
pub fn state_hash(s: &WorldState) -> u64 {
    super::fnv1a64(&canonical_bytes(s))
}
