//! Print every signal head's colour over its first cycle, one row per second.
//!
//!     cargo run -p hubsim --example signals

use hubsim::agents::{signal_state, SignalPrograms};
use hubsim::inputs::fixture_context;

fn main() {
    let ctx = fixture_context();
    let programs = SignalPrograms::from_site(ctx.site());
    let heads: Vec<&String> = programs.0.keys().collect();
    let cycle = programs.0.values().map(|p| p.cycle()).fold(0.0, f64::max);
    println!(
        "t(s)  {}",
        heads.iter().map(|h| format!("{h:>10}")).collect::<String>()
    );
    let mut t = 0.0;
    while t < cycle {
        let row: String = heads
            .iter()
            .map(|h| {
                format!(
                    "{:>10}",
                    format!("{:?}", signal_state(&programs, h, t).unwrap())
                )
            })
            .collect();
        println!("{t:>4}  {row}");
        t += 1.0;
    }
}
