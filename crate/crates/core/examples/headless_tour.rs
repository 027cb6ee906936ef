//! Run the bundled avatar script without a client and print the tour events.
//!
//!     cargo run --release -p hubsim --example headless_tour

use hubsim::inputs::{fixture_context, fixture_dir};
use hubsim::sim::{init_world, parse_input_log, run_headless_with, EventBody};
use std::time::Instant;

fn main() {
    let text = std::fs::read_to_string(fixture_dir().join("tour_walk.ndjson")).unwrap();
    let script = parse_input_log(&text).unwrap();
    let mut world = init_world(fixture_context(), 0).unwrap();
    let started = Instant::now();
    let run = run_headless_with(&mut world, &script, 24_000, |_, events| {
        for e in events {
            match &e.body {
                EventBody::BarrierApproached { .. }
                | EventBody::ParticleCue { .. }
                | EventBody::BarrierResolved { .. }
                | EventBody::TourCompleted { .. } => {
                    println!("{:>6} {}", e.tick, serde_json::to_string(&e.body).unwrap())
                }
                _ => {}
            }
        }
    });
    println!(
        "{} ticks, {} events, {} agents alive, {:.2?}",
        world.state.tick,
        run.events.len(),
        world.state.agents.len(),
        started.elapsed()
    );
}
