//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

use hubsim::agents::AgentBody;
use hubsim::geometry::Vec2;
use hubsim::inputs::{fixture_context, fixture_dir};
use hubsim::sim::{parse_input_log, run_headless_with, EventBody, HeadlessRun, InputFrame, World};
use hubsim::site::{shortest_path, Edge, NavGraph, NavMode, NavNode, PathError};
use hubsim::tour::guided_path;
use serde_json::Value;
use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

type Verdict = Result<String, String>;

fn json(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixture_dir().join(name)).unwrap()).unwrap()
}

fn feature(id: &str) -> Value {
    json("site.json")["features"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["id"] == id)
        .cloned()
        .unwrap()
}

fn coords(f: &Value) -> Vec<Vec2> {
    f["geometry"]["coords"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| Vec2::new(c[0].as_f64().unwrap(), c[1].as_f64().unwrap()))
        .collect()
}

fn world(seed: u64) -> World {
    hubsim::sim::init_world(fixture_context(), seed).unwrap()
}

fn script() -> Vec<InputFrame> {
    parse_input_log(&std::fs::read_to_string(fixture_dir().join("tour_walk.ndjson")).unwrap())
        .unwrap()
}

// Plain geometry, independent of the library's.

fn seg_dist(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    ((p.x - a.x - t * dx).powi(2) + (p.y - a.y - t * dy).powi(2)).sqrt()
}

fn inside(poly: &[Vec2], p: Vec2) -> bool {
    let n = poly.len();
    if (0..n).any(|i| seg_dist(p, poly[i], poly[(i + 1) % n]) < 1e-9) {
        return true;
    }
    let mut c = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            c = !c;
        }
        j = i;
    }
    c
}

fn poly_dist(poly: &[Vec2], p: Vec2) -> f64 {
    if inside(poly, p) {
        return 0.0;
    }
    let n = poly.len();
    (0..n)
        .map(|i| seg_dist(p, poly[i], poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn poly_line_dist(poly: &[Vec2], line: &[Vec2]) -> f64 {
    let cross = |o: Vec2, a: Vec2, b: Vec2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let n = poly.len();
    let mut best = f64::INFINITY;
    for w in line.windows(2) {
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let crosses = (cross(w[0], w[1], a) > 0.0) != (cross(w[0], w[1], b) > 0.0)
                && (cross(a, b, w[0]) > 0.0) != (cross(a, b, w[1]) > 0.0);
            if crosses {
                return 0.0;
            }
            best = best
                .min(seg_dist(a, w[0], w[1]))
                .min(seg_dist(w[0], a, b))
                .min(seg_dist(w[1], a, b));
        }
    }
    if line.iter().any(|&p| inside(poly, p)) {
        return 0.0;
    }
    best
}

/// What the scripted 24,000-tick tour run observed.
#[derive(Default)]
struct TourRun {
    elapsed: Duration,
    resolved: Vec<String>,
    completed: usize,
    off_grid_heading: usize,
    gap_before: f64,
    gap_after: Option<f64>,
    scooter_clearance: Option<f64>,
    guide_hops: Vec<(Vec2, Vec2)>,
    checkpoints: Vec<(u64, u64)>,
}

fn strip_gap(pieces: &[Vec<Vec2>], destination: Vec2) -> f64 {
    let mut gap: f64 = 0.0;
    let mut end: Option<Vec2> = None;
    for piece in pieces {
        if let (Some(e), Some(&s)) = (end, piece.first()) {
            gap = gap.max(e.distance(s));
        }
        end = piece.last().copied();
    }
    end.map_or(gap, |e| gap.max(e.distance(destination)))
}

fn tour_run() -> TourRun {
    let dest = {
        let d = &feature("gs_plaza")["props"]["destination"];
        Vec2::new(d[0].as_f64().unwrap(), d[1].as_f64().unwrap())
    };
    let corridor = coords(&feature("gs_sidewalk"));
    let mut w = world(0);
    let mut r = TourRun {
        gap_before: strip_gap(&w.state.runtime.strips["gs_plaza"], dest),
        ..TourRun::default()
    };
    let frames = script();
    let t0 = Instant::now();
    let run = run_headless_with(&mut w, &frames, 24_000, |w, events| {
        if w.state.avatar.heading % 45 != 0 {
            r.off_grid_heading += 1;
        }
        for e in events {
            match &e.body {
                EventBody::BarrierResolved { barrier, .. } => {
                    if barrier == "b1_strip" {
                        r.gap_after = Some(strip_gap(&w.state.runtime.strips["gs_plaza"], dest));
                    }
                    r.resolved.push(barrier.clone());
                }
                EventBody::TourCompleted { .. } => r.completed += 1,
                _ => {}
            }
        }
        if r.resolved.len() >= 2
            && w.state.runtime.animations.is_empty()
            && r.scooter_clearance.is_none()
        {
            r.scooter_clearance = Some(
                w.obstacle_footprints()
                    .iter()
                    .filter(|(id, _, _)| id.starts_with("sc"))
                    .map(|(_, _, poly)| poly_line_dist(poly, &corridor))
                    .fold(f64::INFINITY, f64::min),
            );
        }
        let path = &w.state.tour.guided_path;
        if w.state.tour.target_index == 2 && path.first().is_some_and(|p| p.level == 0) {
            for p in path.windows(2).filter(|p| p[0].level != p[1].level) {
                r.guide_hops.push((p[0].p, p[1].p));
            }
        }
    });
    r.elapsed = t0.elapsed();
    r.checkpoints = run.checkpoints;
    r
}

fn c1_tour(r: &TourRun) -> Verdict {
    let order = ["b1_strip", "b2_scooters", "b3_elevator"];
    if r.resolved != order {
        return Err(format!("resolved in order {:?}", r.resolved));
    }
    if r.completed != 1 {
        return Err(format!("{} TourCompleted events", r.completed));
    }
    if r.elapsed >= Duration::from_secs(10) {
        return Err(format!("24,000 ticks took {:.2?}", r.elapsed));
    }
    Ok(format!(
        "order {:?}, one TourCompleted, 24,000 ticks in {:.2?}",
        r.resolved, r.elapsed
    ))
}

/// What the two-hour background run observed.
#[derive(Default)]
struct TrafficRun {
    arrivals: BTreeMap<(String, String), Vec<u64>>,
    red_crossings: usize,
    overlaps: usize,
    lane_changes: usize,
    bad_lane_changes: usize,
}

fn color_at(phases: &[(String, f64)], offset: f64, t: f64) -> String {
    let cycle: f64 = phases.iter().map(|p| p.1).sum();
    let mut x = (t + offset).rem_euclid(cycle);
    for (c, d) in phases {
        if x < *d {
            return c.clone();
        }
        x -= d;
    }
    phases.last().unwrap().0.clone()
}

fn traffic_run() -> TrafficRun {
    let heads: BTreeMap<String, (Vec<(String, f64)>, f64)> = json("site.json")["features"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|f| f["kind"] == "signal_head")
        .map(|f| {
            let p = &f["props"];
            let phases = p["phases"]
                .as_array()
                .unwrap()
                .iter()
                .map(|ph| {
                    (
                        ph["color"].as_str().unwrap().to_string(),
                        ph["duration"].as_f64().unwrap(),
                    )
                })
                .collect();
            (
                f["id"].as_str().unwrap().to_string(),
                (phases, p["offset"].as_f64().unwrap_or(0.0)),
            )
        })
        .collect();
    let mut w = world(0);
    let road = w.ctx.road.clone();
    let mut r = TrafficRun::default();
    let mut before: BTreeMap<u64, (String, f64)> = BTreeMap::new();
    run_headless_with(&mut w, &[], 144_000, |w, events| {
        let time = (w.state.tick - 1) as f64 * 0.05;
        for e in events {
            match &e.body {
                EventBody::TransitArrived { line, stop, .. } => r
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
                    r.lane_changes += 1;
                    let ok = front_gap.is_none_or(|g| g >= 1.5 * speed - 1e-9)
                        && rear_gap.is_none_or(|g| g >= 2.0 * follower_speed - 1e-9);
                    if !ok {
                        r.bad_lane_changes += 1;
                    }
                }
                _ => {}
            }
        }
        let mut lanes: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
        let mut now = BTreeMap::new();
        for a in w.state.agents.values() {
            let AgentBody::Vehicle(v) = &a.body else {
                continue;
            };
            if v.done {
                continue;
            }
            lanes
                .entry(v.lane.as_str())
                .or_default()
                .push((v.s, v.length));
            if let Some((lane, s0)) = before.get(&a.id) {
                if *lane == v.lane {
                    for (head, arc) in &road.lane(&v.lane).unwrap().stop_lines {
                        let (phases, offset) = &heads[head];
                        if *s0 < *arc && v.s >= *arc && color_at(phases, *offset, time) == "red" {
                            r.red_crossings += 1;
                        }
                    }
                }
            }
            now.insert(a.id, (v.lane.clone(), v.s));
        }
        for cars in lanes.values_mut() {
            cars.sort_by(|a, b| a.0.total_cmp(&b.0));
            r.overlaps += cars
                .windows(2)
                .filter(|p| p[1].0 - p[1].1 - p[0].0 < -1e-9)
                .count();
        }
        before = now;
    });
    r
}

fn c2_headway(r: &TrafficRun) -> Verdict {
    if r.arrivals.is_empty() {
        return Err("no TransitArrived events".into());
    }
    let mut gaps = Vec::new();
    for (key, ticks) in &r.arrivals {
        if ticks.len() < 2 {
            return Err(format!("{key:?} arrived {} times", ticks.len()));
        }
        for w in ticks.windows(2) {
            let gap = (w[1] - w[0]) as f64 * 0.05;
            if !(300.0..=600.0).contains(&gap) {
                return Err(format!("{key:?} headway {gap} s"));
            }
            gaps.push(gap);
        }
    }
    let lo = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = gaps.iter().cloned().fold(0.0, f64::max);
    Ok(format!(
        "{} gaps over {} (line, stop) pairs, all in [{lo}, {hi}] s",
        gaps.len(),
        r.arrivals.len()
    ))
}

fn c3_controls(r: &TourRun) -> Verdict {
    if r.off_grid_heading > 0 {
        return Err(format!(
            "heading off the 45 degree grid on {} ticks",
            r.off_grid_heading
        ));
    }
    let mut w = world(0);
    let start = w.state.avatar.heading;
    for t in 0..20 {
        w.step(&InputFrame {
            tick: t,
            mv: Vec2::ZERO,
            rot: 1,
            act: false,
        })
        .unwrap();
    }
    let turned = (w.state.avatar.heading + 360 - start) % 360;
    if turned != 45 {
        return Err(format!("20 held rotation ticks turned {turned} degrees"));
    }
    Ok("heading on the grid at all 24,000 ticks; held rotation turns 45 degrees once".into())
}

fn c4_catalog() -> Verdict {
    let dir = tempfile::TempDir::new().unwrap();
    let validate = |catalog: &Value| -> i32 {
        let path = dir.path().join("catalog.json");
        std::fs::write(&path, catalog.to_string()).unwrap();
        let f = |n: &str| fixture_dir().join(n).display().to_string();
        Command::new(env!("CARGO_BIN_EXE_hubsim"))
            .args([
                "validate",
                "--site",
                &f("site.json"),
                "--scenario",
                &f("tour.json"),
            ])
            .args([
                "--schedule",
                &f("schedule.json"),
                "--catalog",
                &path.display().to_string(),
            ])
            .output()
            .unwrap()
            .status
            .code()
            .unwrap()
    };
    let full = json("catalog.json");
    let (p, v) = (
        full["pedestrians"].as_array().unwrap().len(),
        full["vehicles"].as_array().unwrap().len(),
    );
    if (p, v) != (107, 19) {
        return Err(format!(
            "fixture catalog has {p} pedestrians and {v} vehicles"
        ));
    }
    if validate(&full) != 0 {
        return Err("fixture catalog rejected".into());
    }
    let mut cases = Vec::new();
    for (key, delta) in [
        ("pedestrians", -1),
        ("pedestrians", 1),
        ("vehicles", -1),
        ("vehicles", 1),
    ] {
        let mut c = full.clone();
        let list = c[key].as_array_mut().unwrap();
        if delta < 0 {
            list.pop();
        } else {
            let extra = list[0].clone();
            list.push(extra);
        }
        let n = c[key].as_array().unwrap().len();
        let code = validate(&c);
        if code != 2 {
            return Err(format!("{n} {key}: exit {code}"));
        }
        cases.push(format!("{n} {key}"));
    }
    Ok(format!(
        "107/19 accepted; {} rejected with exit 2",
        cases.join(", ")
    ))
}

fn c5_determinism(r: &TourRun) -> Verdict {
    let frames = script();
    let again: HeadlessRun = run_headless_with(&mut world(0), &frames, 24_000, |_, _| {});
    if again.checkpoints != r.checkpoints {
        let at = r
            .checkpoints
            .iter()
            .zip(&again.checkpoints)
            .find(|(a, b)| a != b)
            .map(|(a, _)| a.0);
        return Err(format!("same seed differs at checkpoint {at:?}"));
    }
    if r.checkpoints.len() != 241 {
        return Err(format!(
            "{} checkpoints in 24,000 ticks",
            r.checkpoints.len()
        ));
    }
    let other = run_headless_with(&mut world(1), &frames, 2_000, |_, _| {});
    let first = r
        .checkpoints
        .iter()
        .zip(&other.checkpoints)
        .find(|(a, b)| a.1 != b.1)
        .map(|(a, _)| a.0);
    match first {
        Some(t) if t <= 2_000 => Ok(format!(
            "241 equal checkpoints; seed 1 diverges at tick {t}"
        )),
        _ => Err(format!("seed 1 divergence at {first:?}")),
    }
}

fn c6_traffic(r: &TrafficRun) -> Verdict {
    if r.red_crossings > 0 {
        return Err(format!("{} red-light crossings", r.red_crossings));
    }
    if r.overlaps > 0 {
        return Err(format!("{} same-lane overlaps", r.overlaps));
    }
    if r.lane_changes == 0 {
        return Err("no LaneChange".into());
    }
    if r.bad_lane_changes > 0 {
        return Err(format!(
            "{} lane changes below the gap thresholds",
            r.bad_lane_changes
        ));
    }
    Ok(format!(
        "0 red crossings, 0 overlaps, {} lane changes all within gap thresholds",
        r.lane_changes
    ))
}

fn c7_strip(r: &TourRun) -> Verdict {
    let after = r.gap_after.ok_or("strip barrier never resolved")?;
    if r.gap_before > 5.0 && after <= 0.05 {
        Ok(format!(
            "gap {:.3} m before, {after:.3} m after",
            r.gap_before
        ))
    } else {
        Err(format!(
            "gap {:.3} m before, {after:.3} m after",
            r.gap_before
        ))
    }
}

fn c8_scooters(r: &TourRun) -> Verdict {
    let d = r.scooter_clearance.ok_or("scooters never cleared")?;
    if d >= 0.6 {
        Ok(format!("nearest scooter footprint {d:.3} m from the strip"))
    } else {
        Err(format!("nearest scooter footprint {d:.3} m from the strip"))
    }
}

fn c9_elevator(r: &TourRun) -> Verdict {
    let broken = coords(&feature("elev_w"));
    let alt = coords(&feature("elev_e"));
    let mut w = world(0);
    let frames = script();
    run_headless_with(&mut w, &frames, frames.len() as u64, |_, _| {});
    let arrow = w.state.runtime.arrows.first().ok_or("no arrow guide")?;
    let (first, last) = (arrow.points.first().unwrap(), arrow.points.last().unwrap());
    let (d0, d1) = (poly_dist(&broken, first.p), poly_dist(&alt, last.p));
    if d0 > 1.0 || d1 > 1.0 {
        return Err(format!(
            "arrow ends {d0:.2} m / {d1:.2} m from the elevators"
        ));
    }
    if arrow.points.windows(2).any(|p| p[0].level != p[1].level) {
        return Err("arrow rides a connector".into());
    }
    // Guided paths seen during the run, plus a fresh query from the street.
    let ctx = fixture_context();
    let b3 = &ctx.scenario().barriers[2];
    let exclude: BTreeSet<String> = ["elev_w".to_string()].into();
    let fresh = guided_path(&ctx.walk_graph, 0, Vec2::new(70.0, 66.0), b3, &exclude)
        .map_err(|e| format!("{e}"))?;
    let mut hops = r.guide_hops.clone();
    hops.extend(
        fresh
            .windows(2)
            .filter(|p| p[0].level != p[1].level)
            .map(|p| (p[0].p, p[1].p)),
    );
    if hops.is_empty() {
        return Err("no guided path from level 0 to level -1".into());
    }
    if let Some(h) = hops
        .iter()
        .find(|(p, q)| inside(&broken, *p) || inside(&broken, *q))
    {
        return Err(format!(
            "guided path hops through the broken elevator at {h:?}"
        ));
    }
    Ok(format!(
        "arrow ends {d0:.2} m / {d1:.2} m from the elevators; {} guided level hops avoid it",
        hops.len()
    ))
}

/// Every simple path; minimum weight in millimetres.
fn brute_force(n: usize, edges: &[(u32, u32, u64)], from: u32, to: u32) -> Option<u64> {
    fn go(
        at: u32,
        to: u32,
        e: &[(u32, u32, u64)],
        seen: &mut [bool],
        len: u64,
        best: &mut Option<u64>,
    ) {
        if at == to {
            *best = Some(best.map_or(len, |b| b.min(len)));
            return;
        }
        for &(a, b, mm) in e {
            if a == at && !seen[b as usize] {
                seen[b as usize] = true;
                go(b, to, e, seen, len + mm, best);
                seen[b as usize] = false;
            }
        }
    }
    let mut seen = vec![false; n];
    seen[from as usize] = true;
    let mut best = None;
    go(from, to, edges, &mut seen, 0, &mut best);
    best
}

fn c10_paths() -> Verdict {
    let mut state: u64 = 2024;
    let mut next = move || {
        state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    };
    let mut reachable = 0;
    for case in 0..200 {
        let n = 1 + (next() % 12) as usize;
        let mut edges = Vec::new();
        for a in 0..n as u32 {
            for b in 0..n as u32 {
                if a != b && next() % 100 < 30 {
                    edges.push((a, b, 1 + next() % 3000));
                }
            }
        }
        let nodes = (0..n)
            .map(|i| NavNode {
                level: 0,
                position: Vec2::new(i as f64, 0.0),
            })
            .collect();
        let g = NavGraph::from_parts(
            NavMode::Walk,
            nodes,
            edges
                .iter()
                .map(|&(a, b, mm)| Edge::new(a, b, mm as f64 / 1000.0, None))
                .collect(),
        );
        let (from, to) = ((next() % n as u64) as u32, (next() % n as u64) as u32);
        let got = shortest_path(&g, from, to, &BTreeSet::new());
        match (brute_force(n, &edges, from, to), got) {
            (None, Err(PathError::NoPath { .. })) => {}
            (Some(mm), Ok(p)) if p.weight == mm * 1000 => reachable += 1,
            (want, got) => return Err(format!("graph {case}: expected {want:?}, got {got:?}")),
        }
    }
    Ok(format!(
        "200 graphs agree with exhaustive search ({reachable} with a path)"
    ))
}

fn report(n: u32, name: &str, f: impl FnOnce() -> Verdict) -> bool {
    let t = Instant::now();
    let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let ok = verdict.is_ok();
    let (tag, detail) = match verdict {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("{tag} {n:>2} {name}: {detail} [{:.1?}]", t.elapsed());
    ok
}

fn need<T>(r: Option<&T>) -> Result<&T, String> {
    r.ok_or_else(|| "the shared run panicked".to_string())
}

fn main() {
    let tour = catch_unwind(tour_run).ok();
    let traffic = catch_unwind(traffic_run).ok();
    let results = [
        report(1, "tour reproduction", || c1_tour(need(tour.as_ref())?)),
        report(2, "transit headway", || c2_headway(need(traffic.as_ref())?)),
        report(3, "control scheme", || c3_controls(need(tour.as_ref())?)),
        report(4, "catalog cardinalities", c4_catalog),
        report(5, "determinism", || c5_determinism(need(tour.as_ref())?)),
        report(6, "traffic invariants", || {
            c6_traffic(need(traffic.as_ref())?)
        }),
        report(7, "barrier 1 geometry", || c7_strip(need(tour.as_ref())?)),
        report(8, "barrier 2 geometry", || {
            c8_scooters(need(tour.as_ref())?)
        }),
        report(9, "barrier 3 routing", || c9_elevator(need(tour.as_ref())?)),
        report(10, "pathfinding oracle", c10_paths),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
