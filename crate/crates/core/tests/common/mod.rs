#![allow(dead_code)]

use hubsim::geometry::Vec2;
use hubsim::inputs::{fixture_context, fixture_dir};
use hubsim::sim::{init_world, parse_input_log, InputFrame, World};
use serde_json::Value;

pub fn world(seed: u64) -> World {
    init_world(fixture_context(), seed).expect("fixture world")
}

pub fn tour_script() -> Vec<InputFrame> {
    let text = std::fs::read_to_string(fixture_dir().join("tour_walk.ndjson")).unwrap();
    parse_input_log(&text).unwrap()
}

pub fn fixture_json(name: &str) -> Value {
    let text = std::fs::read_to_string(fixture_dir().join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Raw site feature by id, straight from the fixture file.
pub fn site_feature(id: &str) -> Value {
    fixture_json("site.json")["features"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["id"] == id)
        .cloned()
        .unwrap_or_else(|| panic!("no feature {id}"))
}

pub fn coords(f: &Value) -> Vec<Vec2> {
    f["geometry"]["coords"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| Vec2::new(c[0].as_f64().unwrap(), c[1].as_f64().unwrap()))
        .collect()
}

// Plain geometry written out here on purpose, so checks do not lean on the
// crate's own helpers.

pub fn seg_dist(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.x + t * dx, a.y + t * dy);
    ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt()
}

pub fn inside(poly: &[Vec2], p: Vec2) -> bool {
    let n = poly.len();
    for i in 0..n {
        if seg_dist(p, poly[i], poly[(i + 1) % n]) < 1e-9 {
            return true;
        }
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

pub fn poly_dist(poly: &[Vec2], p: Vec2) -> f64 {
    if inside(poly, p) {
        return 0.0;
    }
    let n = poly.len();
    (0..n)
        .map(|i| seg_dist(p, poly[i], poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn cross(o: Vec2, a: Vec2, b: Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0)
}

/// Minimum distance between a filled polygon and a polyline.
pub fn poly_line_dist(poly: &[Vec2], line: &[Vec2]) -> f64 {
    let n = poly.len();
    let mut best = f64::INFINITY;
    for w in line.windows(2) {
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            if segments_cross(a, b, w[0], w[1]) {
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
