//! The user-steered avatar: discrete 45° rotation, joystick translation with
//! sliding collision, and level changes through operational connectors.

use crate::geometry::{Polygon, Vec2};
use crate::sim::InputFrame;
use crate::site::{LevelId, SiteMap};
use serde::{Deserialize, Serialize};

pub const ROTATION_STEP: u16 = 45;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectorTransit {
    pub connector: String,
    pub remaining_ticks: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvatarState {
    pub level: LevelId,
    pub position: Vec2,
    /// Degrees clockwise from +y, always a multiple of 45.
    pub heading: u16,
    pub speed_cap: f64,
    pub radius: f64,
    pub rot_latch: bool,
    pub in_transit: Option<ConnectorTransit>,
    /// Connector footprint the avatar is standing in after arriving through
    /// it; cleared once it steps out, so arrival does not re-trigger.
    pub last_connector: Option<String>,
    /// Connector whose transit completed on the latest step.
    pub completed_transit: Option<String>,
}

/// Unit vectors `(right, forward)` for a heading, exact at every 45° step.
pub fn heading_axes(heading: u16) -> (Vec2, Vec2) {
    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;
    let (s, c) = match heading % 360 {
        0 => (0.0, 1.0),
        45 => (H, H),
        90 => (1.0, 0.0),
        135 => (H, -H),
        180 => (0.0, -1.0),
        225 => (-H, -H),
        270 => (-1.0, 0.0),
        315 => (-H, H),
        h => {
            let r = (h as f64).to_radians();
            (r.sin(), r.cos())
        }
    };
    (Vec2::new(c, -s), Vec2::new(s, c))
}

/// Local joystick vector (+y forward, +x right) in world coordinates.
pub fn local_to_world(heading: u16, mv: Vec2) -> Vec2 {
    let (right, forward) = heading_axes(heading);
    right * mv.x + forward * mv.y
}

/// World direction as a local joystick vector.
pub fn world_to_local(heading: u16, dir: Vec2) -> Vec2 {
    let (right, forward) = heading_axes(heading);
    Vec2::new(dir.dot(right), dir.dot(forward))
}

/// Obstacle footprints of one level, at their current positions.
pub struct Surroundings<'a> {
    pub site: &'a SiteMap,
    pub obstacles: &'a [(String, LevelId, Vec<Vec2>)],
    pub dt: f64,
}

impl Surroundings<'_> {
    pub fn clear(&self, level: LevelId, p: Vec2, radius: f64) -> bool {
        self.site.is_on_walk_surface(level, p)
            && self
                .obstacles
                .iter()
                .filter(|(_, l, _)| *l == level)
                .all(|(_, _, v)| Polygon(v).distance(p) >= radius)
    }
}

impl AvatarState {
    pub fn new(level: LevelId, position: Vec2, heading: u16, speed_cap: f64, radius: f64) -> Self {
        AvatarState {
            level,
            position,
            heading: heading % 360,
            speed_cap,
            radius,
            rot_latch: false,
            in_transit: None,
            last_connector: None,
            completed_transit: None,
        }
    }

    fn rotate(&mut self, rot: i8) {
        if rot == 0 {
            self.rot_latch = false;
        } else if !self.rot_latch {
            let step = if rot > 0 {
                ROTATION_STEP
            } else {
                360 - ROTATION_STEP
            };
            self.heading = (self.heading + step) % 360;
            self.rot_latch = true;
        }
    }
}

/// Apply one input frame.
pub fn avatar_step(a: &mut AvatarState, input: &InputFrame, env: &Surroundings<'_>) {
    a.completed_transit = None;
    a.rotate(input.rot);

    if let Some(t) = &mut a.in_transit {
        t.remaining_ticks = t.remaining_ticks.saturating_sub(1);
        if t.remaining_ticks == 0 {
            let id = t.connector.clone();
            a.in_transit = None;
            if let Some((f, c)) = env.site.connector(&id) {
                a.level = c.other_level(a.level);
                a.position = Polygon(f.geometry.vertices()).centroid();
            }
            a.last_connector = Some(id.clone());
            a.completed_transit = Some(id);
        }
        return;
    }

    let d = local_to_world(a.heading, input.mv) * (a.speed_cap * env.dt);
    let p = a.position;
    let candidates = [d, Vec2::new(d.x, 0.0), Vec2::new(0.0, d.y)];
    if d != Vec2::ZERO {
        if let Some(mv) = candidates
            .into_iter()
            .find(|&mv| mv != Vec2::ZERO && env.clear(a.level, p + mv, a.radius))
        {
            a.position = p + mv;
        }
    }

    let inside: Option<(String, bool, f64)> = env
        .site
        .connectors_on(a.level)
        .find(|(f, _)| Polygon(f.geometry.vertices()).contains(a.position))
        .map(|(f, c)| (f.id.clone(), c.operational, c.traversal_length()));
    match inside {
        None => a.last_connector = None,
        Some((id, operational, len)) => {
            if operational && a.last_connector.as_deref() != Some(id.as_str()) {
                let ticks = ((len / a.speed_cap / env.dt) - 1e-9).ceil().max(1.0) as u32;
                a.in_transit = Some(ConnectorTransit {
                    connector: id,
                    remaining_ticks: ticks,
                });
            }
        }
    }
}
