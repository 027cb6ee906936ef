use super::catalog::ArchetypeCatalog;
use crate::geometry::ArcPolyline;
use crate::site::{FeatureKind, FeatureProps, SiteMap};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Headway band every (line, stop) pair must respect, seconds.
pub const MIN_HEADWAY: f64 = 300.0;
pub const MAX_HEADWAY: f64 = 600.0;

#[derive(Debug, Error, PartialEq)]
pub enum TransitError {
    #[error("unknown stop `{0}`")]
    UnknownStop(String),
}

/// One transit line. Arrival at stop `i` of the run starting at offset `o`
/// in cycle `k` is `o + k * period + sum(run_times[..i])`; run times are
/// measured arrival to arrival and include the dwell at the earlier stop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitLine {
    pub id: String,
    pub track: String,
    pub stops: Vec<String>,
    pub offsets: Vec<f64>,
    pub period: f64,
    #[serde(default)]
    pub run_times: Vec<f64>,
    #[serde(default)]
    pub archetype: u32,
}

impl TransitLine {
    fn arrival_offset(&self, stop_index: usize) -> f64 {
        self.run_times[..stop_index].iter().sum()
    }

    /// Gaps between consecutive runs over one repeating period.
    pub fn headways(&self) -> Vec<f64> {
        let mut o: Vec<f64> = self
            .offsets
            .iter()
            .map(|x| x.rem_euclid(self.period))
            .collect();
        o.sort_by(f64::total_cmp);
        if o.is_empty() {
            return Vec::new();
        }
        let mut gaps: Vec<f64> = o.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.push(o[0] + self.period - o[o.len() - 1]);
        gaps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitSchedule {
    pub lines: Vec<TransitLine>,
}

impl TransitSchedule {
    pub fn from_json(text: &str) -> Result<TransitSchedule, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn empty() -> TransitSchedule {
        TransitSchedule { lines: Vec::new() }
    }

    /// Every violated schedule rule, one message each.
    pub fn validate(&self, site: &SiteMap, catalog: &ArchetypeCatalog) -> Vec<String> {
        let mut out = Vec::new();
        for line in &self.lines {
            let tag = format!("line `{}`", line.id);
            if !(line.period > 0.0) {
                out.push(format!("{tag}: period must be positive"));
                continue;
            }
            if line.offsets.is_empty() {
                out.push(format!("{tag}: needs at least one offset"));
            }
            if line.offsets.iter().any(|&o| o < 0.0) {
                out.push(format!("{tag}: offsets must be non-negative"));
            }
            if line.run_times.len() + 1 != line.stops.len() {
                out.push(format!(
                    "{tag}: expected {} run times for {} stops",
                    line.stops.len().saturating_sub(1),
                    line.stops.len()
                ));
                continue;
            }
            for gap in line.headways() {
                if !(MIN_HEADWAY..=MAX_HEADWAY).contains(&gap) {
                    out.push(format!(
                        "{tag}: headway of {gap} s outside the [{MIN_HEADWAY}, {MAX_HEADWAY}] s bound"
                    ));
                }
            }
            let track = site
                .feature(&line.track)
                .filter(|f| f.kind() == FeatureKind::TramTrack);
            let Some(track) = track else {
                out.push(format!("{tag}: unknown tram_track `{}`", line.track));
                continue;
            };
            let Some(tram) = catalog.trams.get(line.archetype as usize) else {
                out.push(format!("{tag}: unknown tram archetype {}", line.archetype));
                continue;
            };
            let path = ArcPolyline::new(track.geometry.vertices().to_vec());
            let mut arcs = Vec::new();
            for stop in &line.stops {
                match site.feature(stop).map(|f| (f, &f.props)) {
                    Some((f, FeatureProps::Stop(p))) => {
                        if !p.line_ids.contains(&line.id) {
                            out.push(format!("{tag}: stop `{stop}` does not list this line"));
                        }
                        if f.level != track.level {
                            out.push(format!("{tag}: stop `{stop}` is not on the track level"));
                        }
                        let c = f.polygon().map(|p| p.centroid()).unwrap_or_default();
                        arcs.push(path.project(c));
                    }
                    _ => out.push(format!("{tag}: unknown stop `{stop}`")),
                }
            }
            if arcs.len() != line.stops.len() {
                continue;
            }
            if arcs.windows(2).any(|w| w[1] <= w[0]) {
                out.push(format!("{tag}: stops are not in track order"));
                continue;
            }
            for (i, w) in arcs.windows(2).enumerate() {
                let moving = line.run_times[i] - tram.dwell;
                if !(moving > 0.0) || (w[1] - w[0]) / moving > tram.max_speed {
                    out.push(format!(
                        "{tag}: run time {} s to `{}` infeasible at tram max speed",
                        line.run_times[i],
                        line.stops[i + 1]
                    ));
                }
            }
        }
        out
    }
}

/// Scheduled arrivals at `stop` within `[t0, t1)`, ascending.
pub fn transit_arrivals(
    schedule: &TransitSchedule,
    stop: &str,
    t0: f64,
    t1: f64,
) -> Result<Vec<f64>, TransitError> {
    let mut served = false;
    let mut out = Vec::new();
    for line in &schedule.lines {
        for (i, _) in line.stops.iter().enumerate().filter(|(_, s)| *s == stop) {
            served = true;
            if !(line.period > 0.0) {
                continue;
            }
            let rel = line.arrival_offset(i);
            for &o in &line.offsets {
                let base = o + rel;
                let mut k = ((t0 - base) / line.period).ceil().max(0.0) as u64;
                loop {
                    let t = base + k as f64 * line.period;
                    if t >= t1 {
                        break;
                    }
                    if t >= t0 {
                        out.push(t);
                    }
                    k += 1;
                }
            }
        }
    }
    if !served {
        return Err(TransitError::UnknownStop(stop.to_string()));
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Tick-quantized timetable of one line, used by the tram simulation.
#[derive(Debug, Clone)]
pub struct LineTimetable {
    pub line: String,
    pub track: ArcPolyline,
    pub stops: Vec<(String, f64)>,
    pub offsets: Vec<u64>,
    pub period: u64,
    pub arrival_rel: Vec<u64>,
    pub dwell: u64,
    pub approach: u64,
    pub exit: u64,
    pub max_speed: f64,
    pub archetype: u32,
    pub tick_hz: u64,
}

/// A single scheduled run: offset index and cycle number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunId {
    pub offset: u32,
    pub cycle: u64,
}

fn to_ticks(seconds: f64, hz: u64) -> u64 {
    (seconds * hz as f64 - 1e-9).ceil().max(0.0) as u64
}

impl LineTimetable {
    pub fn build(
        line: &TransitLine,
        site: &SiteMap,
        catalog: &ArchetypeCatalog,
        tick_hz: u64,
    ) -> Option<LineTimetable> {
        let track = site.feature(&line.track)?;
        let path = ArcPolyline::new(track.geometry.vertices().to_vec());
        let tram = catalog.trams.get(line.archetype as usize)?;
        let stops: Vec<(String, f64)> = line
            .stops
            .iter()
            .map(|s| {
                let c = site
                    .feature(s)
                    .and_then(|f| f.polygon().map(|p| p.centroid()))
                    .unwrap_or_default();
                (s.clone(), path.project(c))
            })
            .collect();
        let per_tick = tram.max_speed / tick_hz as f64;
        let first = stops.first()?.1;
        let last = stops.last()?.1;
        let mut acc = 0.0;
        let mut arrival_rel = vec![0];
        for r in &line.run_times {
            acc += r;
            arrival_rel.push(to_ticks(acc, tick_hz));
        }
        Some(LineTimetable {
            line: line.id.clone(),
            approach: (first / per_tick).ceil() as u64,
            exit: ((path.length() - last) / per_tick).ceil() as u64,
            track: path,
            stops,
            offsets: line.offsets.iter().map(|&o| to_ticks(o, tick_hz)).collect(),
            period: to_ticks(line.period, tick_hz).max(1),
            arrival_rel,
            dwell: to_ticks(tram.dwell, tick_hz),
            max_speed: tram.max_speed,
            archetype: line.archetype,
            tick_hz,
        })
    }

    pub fn base(&self, run: RunId) -> u64 {
        self.offsets[run.offset as usize] + run.cycle * self.period
    }

    pub fn arrival(&self, run: RunId, stop: usize) -> u64 {
        self.base(run) + self.arrival_rel[stop]
    }

    pub fn departure(&self, run: RunId, stop: usize) -> u64 {
        self.arrival(run, stop) + self.dwell
    }

    pub fn spawn_tick(&self, run: RunId) -> i64 {
        self.base(run) as i64 + self.arrival_rel[0] as i64 - self.approach as i64
    }

    pub fn end_tick(&self, run: RunId) -> u64 {
        self.departure(run, self.stops.len() - 1) + self.exit
    }

    /// Runs that come into existence at `tick` (or are already under way at tick 1).
    pub fn runs_starting(&self, tick: u64) -> Vec<RunId> {
        let mut out = Vec::new();
        for (j, _) in self.offsets.iter().enumerate() {
            let mut cycle = 0;
            loop {
                let run = RunId {
                    offset: j as u32,
                    cycle,
                };
                let spawn = self.spawn_tick(run);
                if spawn > tick as i64 {
                    break;
                }
                let starts = spawn == tick as i64 || (tick <= 1 && spawn < tick as i64);
                if starts && self.end_tick(run) > tick {
                    out.push(run);
                }
                cycle += 1;
            }
        }
        out.sort();
        out
    }

    /// Arc position along the track at `tick`, with the speed held over the
    /// preceding tick interval.
    pub fn position(&self, run: RunId, tick: u64) -> (f64, f64) {
        let dt = 1.0 / self.tick_hz as f64;
        let n = self.stops.len();
        let len = self.track.length();
        let first_arr = self.arrival(run, 0);
        if tick < first_arr {
            let s = (self.stops[0].1 - self.max_speed * dt * (first_arr - tick) as f64).max(0.0);
            return (s, self.max_speed);
        }
        for i in 0..n {
            let arr = self.arrival(run, i);
            let dep = self.departure(run, i);
            if tick >= arr && tick <= dep {
                let speed = if tick == arr && i == 0 {
                    self.max_speed.min(self.stops[0].1 / dt)
                } else {
                    0.0
                };
                return (self.stops[i].1, if tick == arr { speed } else { 0.0 });
            }
            if i + 1 < n {
                let next_arr = self.arrival(run, i + 1);
                if tick > dep && tick < next_arr {
                    let frac = (tick - dep) as f64 / (next_arr - dep) as f64;
                    let (a, b) = (self.stops[i].1, self.stops[i + 1].1);
                    let speed = (b - a) / ((next_arr - dep) as f64 * dt);
                    return (a + (b - a) * frac, speed);
                }
            }
        }
        let last_dep = self.departure(run, n - 1);
        let s = (self.stops[n - 1].1 + self.max_speed * dt * (tick - last_dep) as f64).min(len);
        (s, self.max_speed)
    }
}
