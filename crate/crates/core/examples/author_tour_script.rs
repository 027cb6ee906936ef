//! Author the bundled avatar script by letting an autopilot follow the
//! guided path through all barriers, recording every frame it sends.
//!
//!     cargo run -p hubsim --example author_tour_script -- fixtures/tour_walk.ndjson

use hubsim::avatar::world_to_local;
use hubsim::geometry::Vec2;
use hubsim::inputs::fixture_context;
use hubsim::sim::{init_world, write_input_log, EventBody, InputFrame, World};

/// Points closer than this are skipped when choosing where to head.
const LOOKAHEAD: f64 = 0.75;
const MAX_TICKS: u64 = 20_000;

/// Heading (multiple of 45) closest to a world direction.
fn heading_of(dir: Vec2) -> u16 {
    let deg = dir.x.atan2(dir.y).to_degrees().rem_euclid(360.0);
    (((deg / 45.0).round() as u16) * 45) % 360
}

fn angle_between(a: u16, b: u16) -> i32 {
    let d = (b as i32 - a as i32).rem_euclid(360);
    if d > 180 {
        d - 360
    } else {
        d
    }
}

fn next_frame(world: &World, last_rot: i8) -> InputFrame {
    let tick = world.state.tick;
    let av = &world.state.avatar;
    let mut frame = InputFrame::neutral(tick);
    if av.in_transit.is_some() || world.state.tour.completed {
        return frame;
    }
    let path = &world.state.tour.guided_path;
    let same_level: Vec<Vec2> = path
        .iter()
        .take_while(|p| p.level == av.level)
        .map(|p| p.p)
        .collect();
    let Some(&last) = same_level.last() else {
        return frame;
    };
    let aim = same_level
        .iter()
        .copied()
        .find(|p| p.distance(av.position) >= LOOKAHEAD)
        .unwrap_or(last);
    let d = aim - av.position;
    if d.length() < 1e-6 {
        return frame;
    }
    let dir = d.normalized();
    let want = heading_of(dir);
    let turn = angle_between(av.heading, want);
    if turn.abs() >= 90 && last_rot == 0 {
        frame.rot = turn.signum() as i8;
    }
    frame.mv = world_to_local(av.heading, dir);
    // Show the info text of every barrier: hold act near triggers.
    let target = world.state.tour.target_index;
    if let Some(b) = world.ctx.scenario().barriers.get(target) {
        frame.act =
            b.level == av.level && b.trigger.center.distance(av.position) <= b.trigger.radius + 1.0;
    }
    frame
}

fn main() {
    let out = std::env::args().nth(1);
    let mut world = init_world(fixture_context(), 0).expect("fixture world");
    let mut frames = Vec::new();
    let mut last_rot = 0;
    let mut done_at = None;
    while world.state.tick < MAX_TICKS {
        let frame = next_frame(&world, last_rot);
        last_rot = frame.rot;
        for e in world.step(&frame).expect("tick matches") {
            match &e.body {
                EventBody::BarrierResolved { barrier, .. } => {
                    eprintln!("tick {:>5}: resolved {barrier}", e.tick)
                }
                EventBody::TourCompleted { .. } => done_at = Some(e.tick),
                _ => {}
            }
        }
        frames.push(frame);
        if done_at.is_some_and(|t| world.state.tick >= t + 20) {
            break;
        }
    }
    match done_at {
        Some(t) => eprintln!("tour completed at tick {t}; {} frames", frames.len()),
        None => eprintln!("tour NOT completed after {} ticks", frames.len()),
    }
    let text = write_input_log(&frames);
    match out {
        Some(path) => std::fs::write(&path, text).expect("write script"),
        None => print!("{text}"),
    }
}
