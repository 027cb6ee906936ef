//! Record a scripted run, then replay the input log against its checkpoints
//! with the right seed and with a wrong one.
//!
//!     cargo run --release -p hubsim --example replay_check

use hubsim::inputs::{fixture_context, fixture_dir};
use hubsim::sim::{
    init_world, parse_checkpoints, parse_input_log, run_headless, run_replay, write_checkpoints,
    write_input_log,
};

fn main() {
    let ctx = fixture_context();
    let text = std::fs::read_to_string(fixture_dir().join("tour_walk.ndjson")).unwrap();
    let script = parse_input_log(&text).unwrap();
    let run = run_headless(&mut init_world(ctx.clone(), 11).unwrap(), &script, 3_000);

    // Round-trip through the on-disk formats.
    let log = parse_input_log(&write_input_log(&run.log)).unwrap();
    let checkpoints = parse_checkpoints(&write_checkpoints(&run.checkpoints)).unwrap();
    println!("{} frames, {} checkpoints", log.len(), checkpoints.len());
    for seed in [11, 12] {
        let outcome = run_replay(ctx.clone(), seed, &log, &checkpoints).unwrap();
        println!("seed {seed}: {outcome:?}");
    }
}
