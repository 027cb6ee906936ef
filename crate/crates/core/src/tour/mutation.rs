use super::scenario::MutationSpec;
use super::state::PathPoint;
use crate::geometry::{Polygon, Vec2};
use crate::site::{shortest_path, FeatureKind, LevelId, NavGraph, SiteMap};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MutationError {
    #[error("resolution of barrier `{0}` was already applied")]
    AlreadyApplied(String),
    #[error("resolution references missing `{0}`")]
    DanglingReference(String),
    #[error("no walk path between `{from}` and `{to}`")]
    NoPath { from: String, to: String },
}

/// Applied resolution, kept in world state and streamed to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationRecord {
    pub barrier: String,
    pub tick: u64,
    pub spec: MutationSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleAnimation {
    pub obstacle: String,
    pub from: Vec2,
    pub to: Vec2,
    pub elapsed: u32,
    pub ticks: u32,
}

/// Arrow chain from a broken connector to its working alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrowGuide {
    pub barrier: String,
    pub from_connector: String,
    pub to_connector: String,
    pub points: Vec<PathPoint>,
}

/// Site geometry that changes during a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuntimeGeometry {
    /// Guide strip centerlines as ordered pieces; the first is the site's own.
    pub strips: BTreeMap<String, Vec<Vec<Vec2>>>,
    pub obstacle_offsets: BTreeMap<String, Vec2>,
    pub animations: Vec<ObstacleAnimation>,
    pub arrows: Vec<ArrowGuide>,
}

impl RuntimeGeometry {
    pub fn from_site(site: &SiteMap) -> RuntimeGeometry {
        RuntimeGeometry {
            strips: site
                .features_of(FeatureKind::GuideStrip)
                .map(|f| (f.id.clone(), vec![f.geometry.vertices().to_vec()]))
                .collect(),
            ..RuntimeGeometry::default()
        }
    }

    pub fn offset(&self, obstacle: &str) -> Vec2 {
        self.obstacle_offsets
            .get(obstacle)
            .copied()
            .unwrap_or(Vec2::ZERO)
    }

    /// Current footprints of every obstacle: `(id, level, vertices)`.
    pub fn obstacle_footprints(&self, site: &SiteMap) -> Vec<(String, LevelId, Vec<Vec2>)> {
        site.features_of(FeatureKind::Obstacle)
            .map(|f| {
                let off = self.offset(&f.id);
                (
                    f.id.clone(),
                    f.level,
                    f.geometry.vertices().iter().map(|&v| v + off).collect(),
                )
            })
            .collect()
    }

    /// Advance running animations by one tick. Returns true when at least one
    /// finished on this tick.
    pub fn advance_animations(&mut self) -> bool {
        let mut finished = false;
        for a in &mut self.animations {
            if a.elapsed >= a.ticks {
                continue;
            }
            a.elapsed += 1;
            let t = a.elapsed as f64 / a.ticks as f64;
            let pos = if a.elapsed == a.ticks {
                a.to
            } else {
                a.from.lerp(a.to, t)
            };
            self.obstacle_offsets.insert(a.obstacle.clone(), pos);
            if a.elapsed == a.ticks {
                finished = true;
            }
        }
        self.animations.retain(|a| a.elapsed < a.ticks);
        finished
    }
}

/// Largest gap met when walking a strip's pieces in order and then stepping
/// to `destination`.
pub fn max_strip_gap(pieces: &[Vec<Vec2>], destination: Option<Vec2>) -> f64 {
    let mut gap: f64 = 0.0;
    for w in pieces.windows(2) {
        if let (Some(&end), Some(&start)) = (w[0].last(), w[1].first()) {
            gap = gap.max(end.distance(start));
        }
    }
    if let (Some(dest), Some(&end)) = (destination, pieces.last().and_then(|p| p.last())) {
        gap = gap.max(end.distance(dest));
    }
    gap
}

/// Apply one barrier resolution to the runtime geometry.
#[allow(clippy::too_many_arguments)]
pub fn apply_resolution(
    barrier: &str,
    level: LevelId,
    spec: &MutationSpec,
    tick: u64,
    tick_hz: u32,
    runtime: &mut RuntimeGeometry,
    applied: &[MutationRecord],
    site: &SiteMap,
    walk: &NavGraph,
    exclude: &BTreeSet<String>,
) -> Result<MutationRecord, MutationError> {
    if applied.iter().any(|m| m.barrier == barrier) {
        return Err(MutationError::AlreadyApplied(barrier.to_string()));
    }
    match spec {
        MutationSpec::AddGuideStripSegment { strip, polyline } => {
            let pieces = runtime
                .strips
                .get_mut(strip)
                .ok_or_else(|| MutationError::DanglingReference(strip.clone()))?;
            pieces.push(polyline.clone());
        }
        MutationSpec::ClearObstacles {
            obstacles,
            displacements,
            duration,
        } => {
            let ticks = ((duration * tick_hz as f64).round() as u32).max(1);
            for (o, d) in obstacles.iter().zip(displacements) {
                if site
                    .feature(o)
                    .is_none_or(|f| f.kind() != FeatureKind::Obstacle)
                {
                    return Err(MutationError::DanglingReference(o.clone()));
                }
                let from = runtime.offset(o);
                runtime.animations.push(ObstacleAnimation {
                    obstacle: o.clone(),
                    from,
                    to: from + *d,
                    elapsed: 0,
                    ticks,
                });
            }
        }
        MutationSpec::ActivateArrowGuides {
            broken,
            alternative,
        } => {
            let node_of = |id: &str| -> Result<u32, MutationError> {
                let (f, _) = site
                    .connector(id)
                    .ok_or_else(|| MutationError::DanglingReference(id.to_string()))?;
                let poly = Polygon(f.geometry.vertices());
                walk.nearest_node_in(level, &poly, poly.centroid())
                    .ok_or_else(|| MutationError::DanglingReference(id.to_string()))
            };
            let (a, b) = (node_of(broken)?, node_of(alternative)?);
            let path = shortest_path(walk, a, b, exclude).map_err(|_| MutationError::NoPath {
                from: broken.clone(),
                to: alternative.clone(),
            })?;
            runtime.arrows.push(ArrowGuide {
                barrier: barrier.to_string(),
                from_connector: broken.clone(),
                to_connector: alternative.clone(),
                points: path
                    .nodes
                    .iter()
                    .map(|&n| PathPoint::of(walk.node(n)))
                    .collect(),
            });
        }
    }
    Ok(MutationRecord {
        barrier: barrier.to_string(),
        tick,
        spec: spec.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strip_gap_measures_jumps_and_the_final_step() {
        let base = vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 10.0)];
        assert_eq!(
            max_strip_gap(std::slice::from_ref(&base), Some(Vec2::new(0.0, 18.0))),
            8.0
        );
        let fill = vec![Vec2::new(0.0, 10.0), Vec2::new(0.0, 18.0)];
        assert_eq!(
            max_strip_gap(&[base, fill], Some(Vec2::new(0.0, 18.0))),
            0.0
        );
    }

    #[test]
    fn animation_runs_for_exactly_its_ticks() {
        let mut rt = RuntimeGeometry::default();
        rt.animations.push(ObstacleAnimation {
            obstacle: "o".into(),
            from: Vec2::ZERO,
            to: Vec2::new(0.0, 3.0),
            elapsed: 0,
            ticks: 40,
        });
        let mut changes = 0;
        let mut last = rt.offset("o");
        for i in 1..=60 {
            let done = rt.advance_animations();
            assert_eq!(done, i == 40);
            if rt.offset("o") != last {
                changes += 1;
                last = rt.offset("o");
            }
        }
        assert_eq!(changes, 40);
        assert_eq!(rt.offset("o"), Vec2::new(0.0, 3.0));
    }
}
