use serde::{Deserialize, Serialize};

/// Tunable constants of the simulation. Defaults are the documented values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub tick_hz: u32,
    /// Multiplier applied to every spawn point rate.
    pub spawn_rate_scale: f64,
    /// Car following: minimum standstill gap (m) and time gap (s).
    pub min_gap: f64,
    pub time_gap: f64,
    /// Overtaking: blocked when the leader is slower than this fraction of
    /// the desired speed for longer than `blocked_seconds`.
    pub blocked_speed_ratio: f64,
    pub blocked_seconds: f64,
    pub blocked_lookahead: f64,
    pub lane_change_front_gap: f64,
    pub lane_change_rear_gap: f64,
    pub repath_cooldown: f64,
    /// Extra clearance (m) on top of the two radii that triggers separation.
    pub separation_margin: f64,
    pub avatar_speed: f64,
    pub avatar_radius: f64,
    /// Half-width of the guide-strip corridor that cleared obstacles must leave.
    pub corridor_half_width: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            tick_hz: 20,
            spawn_rate_scale: 1.0,
            min_gap: 2.0,
            time_gap: 1.5,
            blocked_speed_ratio: 0.5,
            blocked_seconds: 3.0,
            blocked_lookahead: 40.0,
            lane_change_front_gap: 1.5,
            lane_change_rear_gap: 2.0,
            repath_cooldown: 2.0,
            separation_margin: 0.1,
            avatar_speed: 1.4,
            avatar_radius: 0.3,
            corridor_half_width: 0.6,
        }
    }
}

impl SimConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.tick_hz as f64
    }

    /// Whole ticks needed to cover `seconds`, rounded up.
    pub fn ticks_for(&self, seconds: f64) -> u64 {
        (seconds * self.tick_hz as f64 - 1e-9).ceil().max(0.0) as u64
    }
}
