use crate::geometry::{Polygon, Vec2};
use crate::site::{FeatureKind, FeatureProps, LevelId, SiteMap};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartPose {
    pub level: LevelId,
    pub position: Vec2,
    /// Degrees clockwise from +y; a multiple of 45.
    pub heading: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKind {
    InterruptedGuideStrip,
    ClutteredSidewalk,
    BrokenElevator,
}

fn default_trigger_radius() -> f64 {
    3.0
}

fn default_cue_radius() -> f64 {
    8.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub center: Vec2,
    #[serde(default = "default_trigger_radius")]
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Highlight {
    /// Where the exclamation marker hovers: x, y and height above ground.
    pub marker_anchor: [f64; 3],
    #[serde(default = "default_cue_radius")]
    pub cue_radius: f64,
}

/// World change applied when a barrier is reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MutationSpec {
    AddGuideStripSegment {
        strip: String,
        polyline: Vec<Vec2>,
    },
    ClearObstacles {
        obstacles: Vec<String>,
        displacements: Vec<Vec2>,
        /// Animation length in seconds.
        duration: f64,
    },
    ActivateArrowGuides {
        broken: String,
        alternative: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierDef {
    pub id: String,
    pub kind: BarrierKind,
    pub level: LevelId,
    pub trigger: Trigger,
    pub highlight: Highlight,
    pub info_text: String,
    pub resolution: MutationSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierScenario {
    pub version: u32,
    pub start_pose: StartPose,
    pub barriers: Vec<BarrierDef>,
}

impl BarrierScenario {
    pub fn from_json(text: &str) -> Result<BarrierScenario, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Malformed(e.to_string()))
    }

    pub fn barrier(&self, id: &str) -> Option<&BarrierDef> {
        self.barriers.iter().find(|b| b.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("malformed scenario: {0}")]
    Malformed(String),
    #[error("start pose is not on a walkable surface clear of obstacles")]
    StartPoseInvalid,
    #[error("start heading {0} is not a multiple of 45")]
    BadHeading(u16),
    #[error("duplicate barrier id `{0}`")]
    DuplicateBarrier(String),
    #[error("barrier `{0}`: trigger center is not on a walkable surface")]
    TriggerOffSurface(String),
    #[error("barrier `{0}`: cue radius is smaller than the trigger radius")]
    CueRadius(String),
    #[error("barrier `{0}`: marker anchor is more than 5 m from the trigger center")]
    MarkerTooFar(String),
    #[error("barrier `{barrier}` references missing or mistyped `{target}`")]
    DanglingReference { barrier: String, target: String },
    #[error("barrier `{barrier}`: obstacle `{obstacle}` is not movable")]
    NotMovable { barrier: String, obstacle: String },
    #[error("barrier `{0}`: one displacement per obstacle is required")]
    DisplacementCount(String),
    #[error("barrier `{barrier}`: obstacle `{obstacle}` ends {distance:.3} m from a guide strip (needs {required} m)")]
    ObstacleInCorridor {
        barrier: String,
        obstacle: String,
        distance: f64,
        required: f64,
    },
    #[error("barrier `{barrier}`: alternative connector `{connector}` is not operational")]
    AlternativeUnavailable { barrier: String, connector: String },
}

/// Cross-check a scenario against the site. Returns every problem found.
pub fn validate_scenario(
    scenario: &BarrierScenario,
    site: &SiteMap,
    corridor_half_width: f64,
) -> Vec<ScenarioError> {
    let mut out = Vec::new();
    let sp = &scenario.start_pose;
    if !sp.heading.is_multiple_of(45) || sp.heading >= 360 {
        out.push(ScenarioError::BadHeading(sp.heading));
    }
    if !site.is_on_walk_surface(sp.level, sp.position)
        || site
            .features_of(FeatureKind::Obstacle)
            .any(|f| f.level == sp.level && Polygon(f.geometry.vertices()).contains(sp.position))
    {
        out.push(ScenarioError::StartPoseInvalid);
    }
    let mut seen = BTreeSet::new();
    let mut strips: Vec<(LevelId, Vec<Vec2>)> = site
        .features_of(FeatureKind::GuideStrip)
        .map(|f| (f.level, f.geometry.vertices().to_vec()))
        .collect();
    for b in &scenario.barriers {
        if let MutationSpec::AddGuideStripSegment { strip, polyline } = &b.resolution {
            if let Some(f) = site.feature(strip) {
                strips.push((f.level, polyline.clone()));
            }
        }
    }
    for b in &scenario.barriers {
        let id = b.id.clone();
        if !seen.insert(b.id.as_str()) {
            out.push(ScenarioError::DuplicateBarrier(id.clone()));
        }
        if !site.is_on_walk_surface(b.level, b.trigger.center) {
            out.push(ScenarioError::TriggerOffSurface(id.clone()));
        }
        if b.highlight.cue_radius < b.trigger.radius {
            out.push(ScenarioError::CueRadius(id.clone()));
        }
        let [ax, ay, az] = b.highlight.marker_anchor;
        let c = b.trigger.center;
        if ((ax - c.x).powi(2) + (ay - c.y).powi(2) + az.powi(2)).sqrt() > 5.0 {
            out.push(ScenarioError::MarkerTooFar(id.clone()));
        }
        let dangling = |target: &str| ScenarioError::DanglingReference {
            barrier: id.clone(),
            target: target.to_string(),
        };
        match &b.resolution {
            MutationSpec::AddGuideStripSegment { strip, polyline } => match site.feature(strip) {
                Some(f) if f.kind() == FeatureKind::GuideStrip => {
                    if polyline.len() < 2 {
                        out.push(dangling(strip));
                    }
                }
                _ => out.push(dangling(strip)),
            },
            MutationSpec::ClearObstacles {
                obstacles,
                displacements,
                ..
            } => {
                if obstacles.len() != displacements.len() {
                    out.push(ScenarioError::DisplacementCount(id.clone()));
                }
                for (o, d) in obstacles.iter().zip(displacements) {
                    let Some(f) = site.feature(o) else {
                        out.push(dangling(o));
                        continue;
                    };
                    let FeatureProps::Obstacle(props) = &f.props else {
                        out.push(dangling(o));
                        continue;
                    };
                    if !props.movable {
                        out.push(ScenarioError::NotMovable {
                            barrier: id.clone(),
                            obstacle: o.clone(),
                        });
                    }
                    let moved: Vec<Vec2> = f.geometry.vertices().iter().map(|&v| v + *d).collect();
                    let distance = strips
                        .iter()
                        .filter(|(lvl, _)| *lvl == f.level)
                        .map(|(_, line)| Polygon(&moved).distance_to_polyline(line))
                        .fold(f64::INFINITY, f64::min);
                    if distance < corridor_half_width {
                        out.push(ScenarioError::ObstacleInCorridor {
                            barrier: id.clone(),
                            obstacle: o.clone(),
                            distance,
                            required: corridor_half_width,
                        });
                    }
                }
            }
            MutationSpec::ActivateArrowGuides {
                broken,
                alternative,
            } => {
                if site.connector(broken).is_none() {
                    out.push(dangling(broken));
                }
                match site.connector(alternative) {
                    None => out.push(dangling(alternative)),
                    Some((_, c)) if !c.operational => {
                        out.push(ScenarioError::AlternativeUnavailable {
                            barrier: id.clone(),
                            connector: alternative.clone(),
                        })
                    }
                    _ => {}
                }
            }
        }
    }
    out
}
