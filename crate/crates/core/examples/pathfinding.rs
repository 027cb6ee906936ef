//! Shortest walking route from the street down to the station hall, with and
//! without the west elevator in service.
//!
//!     cargo run -p hubsim --example pathfinding

use hubsim::geometry::Vec2;
use hubsim::inputs::fixture_context;
use hubsim::site::shortest_path;
use std::collections::BTreeSet;

fn main() {
    let ctx = fixture_context();
    let g = &ctx.walk_graph;
    let from = g
        .nearest_node(0, Vec2::new(50.0, 45.0))
        .expect("street node");
    let to = g
        .nearest_node(-1, Vec2::new(46.5, 46.5))
        .expect("hall node");

    for broken in [vec![], vec!["elev_w".to_string()]] {
        let exclude: BTreeSet<String> = broken.iter().cloned().collect();
        let path = shortest_path(g, from, to, &exclude).expect("a route exists");
        let via: Vec<_> = path
            .nodes
            .windows(2)
            .filter_map(|w| {
                g.out_edges(w[0])
                    .find(|e| e.to == w[1])
                    .and_then(|e| e.requires_operational_connector.clone())
            })
            .collect();
        println!(
            "out of service {:?}: {:.1} m over {} nodes, via {:?}",
            broken,
            path.weight as f64 / 1e6,
            path.nodes.len(),
            via
        );
    }
}
