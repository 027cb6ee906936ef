use super::{AgentId, VehicleArchetype, VehicleState};
use crate::geometry::ArcPolyline;
use crate::sim::{EventBody, SimConfig};
use crate::site::{FeatureKind, FeatureProps, LevelId, SignalColor, SiteMap};
use std::collections::BTreeMap;

/// Distance kept behind a stop line, in meters.
pub const STOP_MARGIN: f64 = 0.01;
/// Lane changes are not started this close to a stop line.
const STOP_LINE_KEEPOUT: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct Lane {
    pub id: String,
    pub level: LevelId,
    pub line: ArcPolyline,
    pub speed_limit: f64,
    pub adjacent: Option<usize>,
    /// `(signal head id, stop-line arc position)`, ascending by arc.
    pub stop_lines: Vec<(String, f64)>,
}

/// Lanes of the site with their signal stop lines.
#[derive(Debug, Clone, Default)]
pub struct RoadNet {
    pub lanes: Vec<Lane>,
    index: BTreeMap<String, usize>,
}

impl RoadNet {
    pub fn from_site(site: &SiteMap) -> RoadNet {
        let mut lanes: Vec<Lane> = site
            .features_of(FeatureKind::RoadLane)
            .filter_map(|f| {
                let (_, props) = site.lane(&f.id)?;
                Some(Lane {
                    id: f.id.clone(),
                    level: f.level,
                    line: ArcPolyline::new(f.geometry.vertices().to_vec()),
                    speed_limit: props.speed_limit,
                    adjacent: None,
                    stop_lines: Vec::new(),
                })
            })
            .collect();
        let index: BTreeMap<String, usize> = lanes
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.clone(), i))
            .collect();
        for lane in lanes.iter_mut() {
            if let Some((_, p)) = site.lane(&lane.id) {
                lane.adjacent = p
                    .adjacent_lane_id
                    .as_ref()
                    .and_then(|a| index.get(a).copied());
            }
        }
        for head in site.features_of(FeatureKind::SignalHead) {
            let FeatureProps::SignalHead(props) = &head.props else {
                continue;
            };
            let v = head.geometry.vertices();
            for lane_id in &props.lanes {
                let Some(&i) = index.get(lane_id) else {
                    continue;
                };
                let lane = &mut lanes[i];
                let crossing = v
                    .windows(2)
                    .filter_map(|w| lane.line.first_crossing(w[0], w[1]))
                    .fold(None, |acc: Option<f64>, s| {
                        Some(acc.map_or(s, |a| a.min(s)))
                    });
                let s = crossing.unwrap_or_else(|| {
                    v.iter()
                        .map(|&p| lane.line.project(p))
                        .fold(f64::INFINITY, f64::min)
                });
                lane.stop_lines.push((head.id.clone(), s));
            }
        }
        for lane in lanes.iter_mut() {
            lane.stop_lines.sort_by(|a, b| a.1.total_cmp(&b.1));
        }
        RoadNet { lanes, index }
    }

    pub fn index_of(&self, lane: &str) -> Option<usize> {
        self.index.get(lane).copied()
    }

    pub fn lane(&self, lane: &str) -> Option<&Lane> {
        self.index_of(lane).map(|i| &self.lanes[i])
    }
}

/// Another vehicle as seen by the one being updated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleView {
    pub id: AgentId,
    pub lane: usize,
    pub s: f64,
    pub length: f64,
    pub speed: f64,
}

fn leader_on(traffic: &[VehicleView], lane: usize, s: f64, me: AgentId) -> Option<VehicleView> {
    traffic
        .iter()
        .filter(|o| o.id != me && o.lane == lane && (o.s, o.id) > (s, me))
        .min_by(|a, b| a.s.total_cmp(&b.s).then(a.id.cmp(&b.id)))
        .copied()
}

fn follower_on(traffic: &[VehicleView], lane: usize, s: f64, me: AgentId) -> Option<VehicleView> {
    traffic
        .iter()
        .filter(|o| o.id != me && o.lane == lane && (o.s, o.id) <= (s, me))
        .max_by(|a, b| a.s.total_cmp(&b.s).then(a.id.cmp(&b.id)))
        .copied()
}

/// Largest speed this tick that keeps the time gap and can still brake to
/// the standstill gap behind a leader moving at `vl`.
pub fn follow_speed(gap: f64, vl: f64, decel: f64, cfg: &SimConfig, dt: f64) -> f64 {
    let time_gap = (gap + vl * dt) / (cfg.time_gap + dt);
    let brake = (2.0 * decel * (gap - cfg.min_gap) + vl * vl)
        .max(0.0)
        .sqrt();
    time_gap.min(brake).max(0.0)
}

fn near_stop_line(lane: &Lane, s: f64) -> bool {
    lane.stop_lines
        .iter()
        .any(|(_, x)| (s - x).abs() <= STOP_LINE_KEEPOUT)
}

/// Advance one vehicle by one tick. `traffic` holds every vehicle with its
/// current state (those updated earlier this tick already moved).
#[allow(clippy::too_many_arguments)]
pub fn vehicle_step(
    id: AgentId,
    v: &mut VehicleState,
    speed: &mut f64,
    arch: &VehicleArchetype,
    traffic: &[VehicleView],
    road: &RoadNet,
    signals: &BTreeMap<String, SignalColor>,
    cfg: &SimConfig,
) -> Option<EventBody> {
    let dt = cfg.dt();
    let Some(mut li) = road.index_of(&v.lane) else {
        *speed = 0.0;
        return None;
    };
    let mut event = None;

    let leader = leader_on(traffic, li, v.s, id);
    let gap = leader.map(|l| l.s - l.length - v.s);
    let blocked = match (leader, gap) {
        (Some(l), Some(g)) => {
            g <= cfg.blocked_lookahead && l.speed < cfg.blocked_speed_ratio * v.desired_speed
        }
        _ => false,
    };
    v.blocked_ticks = if blocked { v.blocked_ticks + 1 } else { 0 };

    if v.blocked_ticks as u64 > cfg.ticks_for(cfg.blocked_seconds) {
        if let Some(ti) = road.lanes[li].adjacent {
            let target = &road.lanes[ti];
            let st = target.line.project(road.lanes[li].line.point_at(v.s));
            let ahead = leader_on(traffic, ti, st, id);
            let behind = follower_on(traffic, ti, st, id);
            let front_gap = ahead.map(|l| l.s - l.length - st);
            let rear_gap = behind.map(|f| st - v.length - f.s);
            let follower_speed = behind.map_or(0.0, |f| f.speed);
            let front_ok = front_gap.is_none_or(|g| {
                g >= (cfg.lane_change_front_gap * *speed).max(cfg.min_gap)
                    && gap.is_none_or(|cur| g > cur)
            });
            let rear_ok = rear_gap
                .is_none_or(|g| g >= (cfg.lane_change_rear_gap * follower_speed).max(cfg.min_gap));
            let clear_of_lines =
                !near_stop_line(&road.lanes[li], v.s) && !near_stop_line(target, st);
            if front_ok && rear_ok && clear_of_lines && st - v.length >= 0.0 {
                event = Some(EventBody::LaneChange {
                    agent_id: id,
                    from_lane: v.lane.clone(),
                    to_lane: target.id.clone(),
                    speed: *speed,
                    front_gap,
                    rear_gap,
                    follower_speed,
                });
                v.lane = target.id.clone();
                v.s = st;
                v.blocked_ticks = 0;
                li = ti;
            }
        }
    }

    let lane = &road.lanes[li];
    let desired = v.desired_speed.min(lane.speed_limit);
    let v0 = *speed;
    let mut upper = desired.min(v0 + arch.accel * dt);
    let mut s_limit = f64::INFINITY;

    if let Some(l) = leader_on(traffic, li, v.s, id) {
        let g = l.s - l.length - v.s;
        upper = upper.min(follow_speed(g, l.speed, arch.decel, cfg, dt));
        s_limit = s_limit.min(l.s - l.length);
    }
    for (head, stop_s) in &lane.stop_lines {
        let line = stop_s - STOP_MARGIN;
        if v.s > line {
            continue;
        }
        let dist = line - v.s;
        let must_stop = match signals.get(head) {
            Some(SignalColor::Red) => true,
            Some(SignalColor::Yellow) => v0 * v0 / (2.0 * arch.decel) <= dist,
            _ => false,
        };
        if must_stop {
            upper = upper.min((2.0 * arch.decel * dist).sqrt());
            s_limit = s_limit.min(line);
        }
        break;
    }

    let mut v1 = upper.max((v0 - arch.decel * dt).max(0.0));
    let mut s1 = v.s + v1 * dt;
    if s1 > s_limit {
        s1 = s_limit.max(v.s);
        v1 = v1.min((s1 - v.s) / dt);
    }
    let len = lane.line.length();
    if s1 >= len {
        s1 = len;
        v.done = true;
    }
    v.s = s1;
    *speed = v1.max(0.0);
    event
}
