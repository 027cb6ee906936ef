//! Scheduled arrivals at every stop during the first hour.
//!
//!     cargo run -p hubsim --example headways

use hubsim::agents::transit_arrivals;
use hubsim::inputs::fixture_context;

fn main() {
    let ctx = fixture_context();
    let schedule = &ctx.inputs.schedule;
    for line in &schedule.lines {
        println!("line {} headways {:?} s", line.id, line.headways());
        for stop in &line.stops {
            let times = transit_arrivals(schedule, stop, 0.0, 3600.0).unwrap();
            let clock: Vec<String> = times
                .iter()
                .map(|t| format!("{:02}:{:02}", (*t as u64) / 60, (*t as u64) % 60))
                .collect();
            println!("  {stop}: {}", clock.join(" "));
        }
    }
}
