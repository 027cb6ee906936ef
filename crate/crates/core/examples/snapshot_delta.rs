//! Drive a transport-free session for ten seconds and compare the size of
//! full snapshots with the per-tick deltas a client receives.
//!
//!     cargo run -p hubsim --example snapshot_delta

use hubsim::inputs::fixture_context;
use hubsim::protocol::{apply_delta, Session, WireMessage};
use hubsim::sim::init_world;

fn main() {
    let world = init_world(fixture_context(), 3).unwrap();
    let mut session = Session::new("demo".into(), world, "-".into(), "-".into());
    let mut client = match &session.handle_text(r#"{"t":"hello","proto":1,"name":"demo"}"#)[1] {
        WireMessage::Snapshot(s) => s.clone(),
        _ => unreachable!("hello is answered with welcome then snapshot"),
    };
    let (mut delta_bytes, mut deltas) = (0, 0);
    for _ in 0..200 {
        for msg in session.tick() {
            let text = msg.encode();
            match msg {
                WireMessage::Delta(d) => {
                    client = apply_delta(&client, &d);
                    delta_bytes += text.len();
                    deltas += 1;
                }
                WireMessage::Snapshot(s) => {
                    let same = s.agents == client.agents && s.avatar == client.avatar;
                    println!(
                        "tick {:>3}: snapshot {} bytes, {} agents, client in sync: {same}",
                        s.tick,
                        text.len(),
                        s.agents.len()
                    );
                    client = s;
                }
                _ => {}
            }
        }
    }
    println!("{deltas} deltas, {} bytes on average", delta_bytes / deltas);
}
