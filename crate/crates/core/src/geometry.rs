//! Planar geometry helpers shared by the site model, the agents and the tour.
//!
//! All coordinates are local meters with the origin at the south-west corner
//! of the site, +x east and +y north.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// Tolerance used for on-boundary tests.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn length(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).length()
    }

    /// Unit vector, or zero for a zero-length input.
    pub fn normalized(self) -> Vec2 {
        let l = self.length();
        if l > 0.0 {
            self * (1.0 / l)
        } else {
            Vec2::ZERO
        }
    }

    /// Left-hand perpendicular (counter-clockwise quarter turn).
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x - EPS
            && p.x <= self.max.x + EPS
            && p.y >= self.min.y - EPS
            && p.y <= self.max.y + EPS
    }
}

/// Distance from `p` to the closed segment `a`–`b`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    p.distance(closest_on_segment(p, a, b).0)
}

/// Closest point on segment `a`–`b` to `p`, with its parameter in [0, 1].
pub fn closest_on_segment(p: Vec2, a: Vec2, b: Vec2) -> (Vec2, f64) {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return (a, 0.0);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (a + ab * t, t)
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) - EPS
        && p.x <= a.x.max(b.x) + EPS
        && p.y >= a.y.min(b.y) - EPS
        && p.y <= a.y.max(b.y) + EPS
}

/// True when closed segments `p1`–`p2` and `q1`–`q2` share at least one point.
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS))
        && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
    {
        return true;
    }
    (d1.abs() <= EPS && on_segment(q1, q2, p1))
        || (d2.abs() <= EPS && on_segment(q1, q2, p2))
        || (d3.abs() <= EPS && on_segment(p1, p2, q1))
        || (d4.abs() <= EPS && on_segment(p1, p2, q2))
}

/// Closed simple polygon given by its vertices (implicitly closed).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon<'a>(pub &'a [Vec2]);

impl Polygon<'_> {
    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.0.len();
        (0..n).map(move |i| (self.0[i], self.0[(i + 1) % n]))
    }

    /// Point-in-polygon by crossing number; points on the boundary count as inside.
    pub fn contains(&self, p: Vec2) -> bool {
        if self.boundary_distance(p) <= EPS {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `p` to the filled polygon (zero inside).
    pub fn distance(&self, p: Vec2) -> f64 {
        if self.contains(p) {
            0.0
        } else {
            self.boundary_distance(p)
        }
    }

    pub fn centroid(&self) -> Vec2 {
        let mut area = 0.0;
        let mut c = Vec2::ZERO;
        for (a, b) in self.edges() {
            let w = a.cross(b);
            area += w;
            c = c + (a + b) * w;
        }
        if area.abs() < EPS {
            let n = self.0.len().max(1) as f64;
            return self.0.iter().fold(Vec2::ZERO, |s, &v| s + v) * (1.0 / n);
        }
        c * (1.0 / (3.0 * area))
    }

    /// True when two non-adjacent edges touch.
    pub fn self_intersects(&self) -> bool {
        let n = self.0.len();
        for i in 0..n {
            for j in (i + 1)..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a1, a2) = (self.0[i], self.0[(i + 1) % n]);
                let (b1, b2) = (self.0[j], self.0[(j + 1) % n]);
                if segments_intersect(a1, a2, b1, b2) {
                    return true;
                }
            }
        }
        false
    }

    /// True when the polyline touches the filled polygon.
    pub fn touches_polyline(&self, line: &[Vec2]) -> bool {
        if line.iter().any(|&p| self.contains(p)) {
            return true;
        }
        line.windows(2).any(|w| {
            self.edges()
                .any(|(a, b)| segments_intersect(w[0], w[1], a, b))
        })
    }

    /// Minimum distance between the filled polygon and a polyline.
    pub fn distance_to_polyline(&self, line: &[Vec2]) -> f64 {
        if self.touches_polyline(line) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for w in line.windows(2) {
            for &v in self.0 {
                best = best.min(point_segment_distance(v, w[0], w[1]));
            }
            for (a, b) in self.edges() {
                best = best.min(point_segment_distance(w[0], a, b));
                best = best.min(point_segment_distance(w[1], a, b));
            }
        }
        best
    }
}

/// Polyline with cumulative arc-length, used for lanes and tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcPolyline {
    pub points: Vec<Vec2>,
    pub cumulative: Vec<f64>,
}

impl ArcPolyline {
    pub fn new(points: Vec<Vec2>) -> Self {
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                acc += points[i - 1].distance(*p);
            }
            cumulative.push(acc);
        }
        ArcPolyline { points, cumulative }
    }

    pub fn length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Point at arc-length `s` (clamped to the polyline).
    pub fn point_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.length());
        let i = self.segment_index(s);
        let (a, b) = (self.points[i], self.points[i + 1]);
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        if seg <= 0.0 {
            return a;
        }
        a.lerp(b, (s - self.cumulative[i]) / seg)
    }

    /// Unit tangent at arc-length `s`.
    pub fn direction_at(&self, s: f64) -> Vec2 {
        let i = self.segment_index(s.clamp(0.0, self.length()));
        (self.points[i + 1] - self.points[i]).normalized()
    }

    fn segment_index(&self, s: f64) -> usize {
        let n = self.points.len();
        match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Arc-length of the closest point on the polyline to `p`.
    pub fn project(&self, p: Vec2) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..self.points.len() - 1 {
            let (q, t) = closest_on_segment(p, self.points[i], self.points[i + 1]);
            let d = q.distance(p);
            if d < best.0 {
                let seg = self.cumulative[i + 1] - self.cumulative[i];
                best = (d, self.cumulative[i] + t * seg);
            }
        }
        best.1
    }

    /// Arc-length of the first crossing with segment `a`–`b`.
    pub fn first_crossing(&self, a: Vec2, b: Vec2) -> Option<f64> {
        for i in 0..self.points.len() - 1 {
            let (p, q) = (self.points[i], self.points[i + 1]);
            if !segments_intersect(p, q, a, b) {
                continue;
            }
            let r = q - p;
            let s = b - a;
            let denom = r.cross(s);
            let t = if denom.abs() < EPS {
                0.0
            } else {
                ((a - p).cross(s) / denom).clamp(0.0, 1.0)
            };
            return Some(self.cumulative[i] + t * r.length());
        }
        None
    }

    /// Mean direction (normalized end minus start of each segment, summed).
    pub fn mean_direction(&self) -> Vec2 {
        self.points
            .windows(2)
            .fold(Vec2::ZERO, |acc, w| acc + (w[1] - w[0]).normalized())
            .normalized()
    }
}

/// Minimum distance from `p` to any segment of a polyline.
pub fn polyline_distance(p: Vec2, line: &[Vec2]) -> f64 {
    line.windows(2)
        .map(|w| point_segment_distance(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Quantize a real value to integer micrometers, rounding half to even.
pub fn quantize_um(v: f64) -> i64 {
    (v * 1e6).round_ties_even() as i64
}

/// Value snapped to the micrometer grid (at most six decimals).
pub fn snap_um(v: f64) -> f64 {
    quantize_um(v) as f64 / 1e6
}
