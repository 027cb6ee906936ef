//! Two simulated hours of background traffic with no one at the controls.

mod common;

use common::*;
use hubsim::agents::{AgentBody, AgentKind};
use hubsim::inputs::{fixture_dir, load_inputs, InputPaths};
use hubsim::sim::{init_world, run_headless_with, EventBody, SimConfig, SimContext, World};
use proptest::prelude::*;
use std::collections::BTreeMap;
use std::sync::Arc;

const TICKS: u64 = 144_000; // 7,200 s
const DT: f64 = 0.05;

struct Head {
    lanes: Vec<String>,
    phases: Vec<(String, f64)>,
    offset: f64,
}

impl Head {
    fn color(&self, t: f64) -> &str {
        let cycle: f64 = self.phases.iter().map(|p| p.1).sum();
        let mut x = (t + self.offset).rem_euclid(cycle);
        for (c, d) in &self.phases {
            if x < *d {
                return c;
            }
            x -= d;
        }
        &self.phases.last().unwrap().0
    }
}

fn heads() -> BTreeMap<String, Head> {
    fixture_json("site.json")["features"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|f| f["kind"] == "signal_head")
        .map(|f| {
            let p = &f["props"];
            let head = Head {
                lanes: p["lanes"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|l| l.as_str().unwrap().to_string())
                    .collect(),
                phases: p["phases"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|ph| {
                        (
                            ph["color"].as_str().unwrap().to_string(),
                            ph["duration"].as_f64().unwrap(),
                        )
                    })
                    .collect(),
                offset: p["offset"].as_f64().unwrap_or(0.0),
            };
            (f["id"].as_str().unwrap().to_string(), head)
        })
        .collect()
}

fn speeds(kind: &str, key: &str) -> Vec<f64> {
    fixture_json("catalog.json")[kind]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e[key].as_f64().unwrap())
        .collect()
}

#[derive(Default, Debug)]
struct Tally {
    arrivals: BTreeMap<(String, String), Vec<u64>>,
    red_crossings: Vec<(u64, u64)>,
    overlaps: Vec<(u64, u64, u64)>,
    lane_changes: usize,
    bad_lane_changes: Vec<String>,
    ped_too_fast: Vec<(u64, u64)>,
    veh_too_fast: Vec<(u64, u64)>,
    off_lane: Vec<(u64, u64)>,
    conservation: Vec<u64>,
    totality: Vec<u64>,
    order: Vec<u64>,
    max_agents: usize,
}

/// Step `world` for `ticks` with no avatar input and record every rule break.
fn audit(mut world: World, ticks: u64) -> Tally {
    let heads = heads();
    let walk = speeds("pedestrians", "walk_speed");
    let ride = speeds("cyclists", "walk_speed");
    let vmax = speeds("vehicles", "max_speed");
    let road = world.ctx.road.clone();
    // (head id, stop arc) per lane.
    let stop_lines: BTreeMap<String, Vec<(String, f64)>> = road
        .lanes
        .iter()
        .map(|l| (l.id.clone(), l.stop_lines.clone()))
        .collect();
    for (id, h) in &heads {
        for lane in &h.lanes {
            assert!(
                stop_lines[lane].iter().any(|(hid, _)| hid == id),
                "{lane} has no stop line for {id}"
            );
        }
    }

    let mut t = Tally::default();
    let mut before: BTreeMap<u64, (String, f64)> = BTreeMap::new();
    let mut live: i64 = 0;
    run_headless_with(&mut world, &[], ticks, |w, events| {
        let tick = w.state.tick - 1;
        let time = tick as f64 * DT;
        // Ordering, conservation, headways, lane-change audits.
        let mut last_key = (0u8, 0u64);
        for e in events {
            let subject = match &e.body {
                EventBody::AgentSpawned { agent_id, .. }
                | EventBody::AgentDespawned { agent_id, .. }
                | EventBody::TransitArrived { agent_id, .. }
                | EventBody::TransitDeparted { agent_id, .. }
                | EventBody::LaneChange { agent_id, .. } => *agent_id,
                _ => 0,
            };
            let key = (e.body.phase(), subject);
            if key < last_key {
                t.order.push(tick);
            }
            last_key = key;
            match &e.body {
                EventBody::AgentSpawned { .. } => live += 1,
                EventBody::AgentDespawned { .. } => live -= 1,
                EventBody::TransitArrived { line, stop, .. } => t
                    .arrivals
                    .entry((line.clone(), stop.clone()))
                    .or_default()
                    .push(e.tick),
                EventBody::LaneChange {
                    speed,
                    front_gap,
                    rear_gap,
                    follower_speed,
                    ..
                } => {
                    t.lane_changes += 1;
                    let front_ok = front_gap.is_none_or(|g| g >= 1.5 * speed - 1e-9);
                    let rear_ok = rear_gap.is_none_or(|g| g >= 2.0 * follower_speed - 1e-9);
                    if !front_ok || !rear_ok {
                        t.bad_lane_changes.push(format!("{e:?}"));
                    }
                }
                _ => {}
            }
        }
        if live != w.state.agents.len() as i64 {
            t.conservation.push(tick);
        }
        let s = w.stats;
        if s.vehicles_updated != s.vehicles
            || s.pedestrians_updated != s.pedestrians
            || s.trams_updated != s.trams
        {
            t.totality.push(tick);
        }
        t.max_agents = t.max_agents.max(w.state.agents.len());

        let mut by_lane: BTreeMap<&str, Vec<(f64, f64, u64)>> = BTreeMap::new();
        let mut now = BTreeMap::new();
        for a in w.state.agents.values() {
            match &a.body {
                AgentBody::Pedestrian(p) => {
                    let cap = if p.cyclist {
                        ride[a.archetype as usize]
                    } else {
                        walk[a.archetype as usize]
                    };
                    if a.speed > cap + 1e-12 {
                        t.ped_too_fast.push((tick, a.id));
                    }
                }
                AgentBody::Vehicle(v) if !v.done => {
                    if a.speed > vmax[a.archetype as usize] + 1e-12 || a.speed < 0.0 {
                        t.veh_too_fast.push((tick, a.id));
                    }
                    let len = road.lane(&v.lane).unwrap().line.length();
                    if v.s < -1e-9 || v.s > len + 1e-9 {
                        t.off_lane.push((tick, a.id));
                    }
                    by_lane
                        .entry(v.lane.as_str())
                        .or_default()
                        .push((v.s, v.length, a.id));
                    now.insert(a.id, (v.lane.clone(), v.s));
                    // Red-light audit: a stop line crossed during this tick
                    // needs green or yellow at the tick's start.
                    if let Some((lane0, s0)) = before.get(&a.id) {
                        if *lane0 == v.lane {
                            for (head, arc) in &stop_lines[&v.lane] {
                                if *s0 < *arc && v.s >= *arc && heads[head].color(time) == "red" {
                                    t.red_crossings.push((tick, a.id));
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        for cars in by_lane.values_mut() {
            cars.sort_by(|a, b| a.0.total_cmp(&b.0));
            for pair in cars.windows(2) {
                let (follower, leader) = (pair[0], pair[1]);
                if leader.0 - leader.1 - follower.0 < -1e-9 {
                    t.overlaps.push((tick, follower.2, leader.2));
                }
            }
        }
        before = now;
    });
    t
}

fn assert_clean(t: &Tally) {
    assert!(t.order.is_empty(), "events out of order at {:?}", t.order);
    assert!(
        t.conservation.is_empty(),
        "conservation broken at {:?}",
        t.conservation
    );
    assert!(
        t.totality.is_empty(),
        "phase totality broken at {:?}",
        &t.totality[..t.totality.len().min(5)]
    );
    assert!(
        t.red_crossings.is_empty(),
        "red crossings {:?}",
        t.red_crossings
    );
    assert!(
        t.overlaps.is_empty(),
        "overlaps {:?}",
        &t.overlaps[..t.overlaps.len().min(5)]
    );
    assert!(t.bad_lane_changes.is_empty(), "{:?}", t.bad_lane_changes);
    assert!(t.ped_too_fast.is_empty(), "{:?}", t.ped_too_fast);
    assert!(t.veh_too_fast.is_empty(), "{:?}", t.veh_too_fast);
    assert!(t.off_lane.is_empty(), "{:?}", t.off_lane);
    assert!(t.max_agents > 0);
}

#[test]
fn two_hours_of_traffic_obey_the_rules() {
    let t = audit(world(0), TICKS);
    assert_clean(&t);
    assert!(t.lane_changes >= 1);

    let lines = fixture_json("schedule.json")["lines"]
        .as_array()
        .unwrap()
        .len();
    assert_eq!(t.arrivals.len(), lines);
    for (key, ticks) in &t.arrivals {
        assert!(ticks.len() >= 2, "{key:?} arrived {} times", ticks.len());
        for w in ticks.windows(2) {
            let gap = (w[1] - w[0]) as f64 * DT;
            assert!((300.0..=600.0).contains(&gap), "{key:?} headway {gap} s");
        }
    }
}

#[test]
fn agent_kinds_all_appear() {
    let mut world = world(3);
    let mut seen = std::collections::BTreeSet::new();
    run_headless_with(&mut world, &[], 6_000, |_, events| {
        for e in events {
            if let EventBody::AgentSpawned { agent, .. } = &e.body {
                seen.insert(*agent);
            }
        }
    });
    assert!(seen.contains(&AgentKind::Vehicle));
    assert!(seen.contains(&AgentKind::Pedestrian));
    assert!(seen.contains(&AgentKind::Tram));
}

fn world_with_density(seed: u64, spawn_rate_scale: f64) -> World {
    let config = SimConfig {
        spawn_rate_scale,
        ..SimConfig::default()
    };
    let loaded = load_inputs(&InputPaths::in_dir(fixture_dir()), config).unwrap();
    init_world(Arc::new(SimContext::new(loaded.inputs).unwrap()), seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn rules_hold_for_any_seed_and_density(seed: u64, scale in 0.5f64..4.0) {
        let t = audit(world_with_density(seed, scale), 3_000);
        assert_clean(&t);
    }
}
