//! Site description: typed geometry of the hub, its loader, validation and
//! the per-mode navigation graphs built from it.

mod nav;
mod path;
mod validate;

pub use nav::{
    build_nav_graph, build_walk_graph_with, Edge, NavError, NavGraph, NavMode, NavNode, NodeId,
    WALK_PITCH,
};
pub use path::{shortest_path, DistanceField, Path, PathError};
pub use validate::{validate_site, Severity, ValidationIssue, ValidationReport};

use crate::geometry::{ArcPolyline, Polygon, Rect, Vec2};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Vertical level of a feature: 0 is ground, -1 the underground station.
pub type LevelId = i32;

pub const SITE_FORMAT_VERSION: u32 = 1;
/// Largest accepted site extent along either axis, in meters.
pub const MAX_SITE_EXTENT: f64 = 1000.0;

#[derive(Debug, Error, PartialEq)]
pub enum SiteError {
    #[error("malformed site document: {0}")]
    MalformedDocument(String),
    #[error("feature `{id}` has unknown kind `{kind}`")]
    UnknownKind { id: String, kind: String },
    #[error("geometry error in feature `{id}`: {reason}")]
    GeometryError { id: String, reason: String },
    #[error("feature `{id}` references missing `{target}`")]
    DanglingReference { id: String, target: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    WalkSurface,
    RoadLane,
    TramTrack,
    Stop,
    Connector,
    GuideStrip,
    Obstacle,
    SignalHead,
    SpawnPoint,
    Crossing,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 10] = [
        FeatureKind::WalkSurface,
        FeatureKind::RoadLane,
        FeatureKind::TramTrack,
        FeatureKind::Stop,
        FeatureKind::Connector,
        FeatureKind::GuideStrip,
        FeatureKind::Obstacle,
        FeatureKind::SignalHead,
        FeatureKind::SpawnPoint,
        FeatureKind::Crossing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::WalkSurface => "walk_surface",
            FeatureKind::RoadLane => "road_lane",
            FeatureKind::TramTrack => "tram_track",
            FeatureKind::Stop => "stop",
            FeatureKind::Connector => "connector",
            FeatureKind::GuideStrip => "guide_strip",
            FeatureKind::Obstacle => "obstacle",
            FeatureKind::SignalHead => "signal_head",
            FeatureKind::SpawnPoint => "spawn_point",
            FeatureKind::Crossing => "crossing",
        }
    }

    pub fn parse(s: &str) -> Option<FeatureKind> {
        FeatureKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    fn wants_polygon(self) -> bool {
        !matches!(
            self,
            FeatureKind::RoadLane
                | FeatureKind::TramTrack
                | FeatureKind::GuideStrip
                | FeatureKind::SignalHead
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "coords", rename_all = "snake_case")]
pub enum Geometry {
    Polygon(Vec<Vec2>),
    Polyline(Vec<Vec2>),
}

impl Geometry {
    pub fn vertices(&self) -> &[Vec2] {
        match self {
            Geometry::Polygon(v) | Geometry::Polyline(v) => v,
        }
    }

    pub fn polygon(&self) -> Option<Polygon<'_>> {
        match self {
            Geometry::Polygon(v) => Some(Polygon(v)),
            Geometry::Polyline(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectorKind {
    Elevator,
    Stairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalColor {
    Green,
    Yellow,
    Red,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalPhase {
    pub color: SignalColor,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpawnAgent {
    Vehicle,
    Pedestrian,
    Cyclist,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WalkSurfaceProps {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneProps {
    pub speed_limit: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacent_lane_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackProps {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopProps {
    pub line_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectorProps {
    pub connector: ConnectorKind,
    pub connects: [LevelId; 2],
    pub operational: bool,
    /// Overrides the default traversal length (10 m elevator, 15 m stairs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traversal_length: Option<f64>,
}

impl ConnectorProps {
    pub fn traversal_length(&self) -> f64 {
        self.traversal_length.unwrap_or(match self.connector {
            ConnectorKind::Elevator => 10.0,
            ConnectorKind::Stairs => 15.0,
        })
    }

    pub fn other_level(&self, level: LevelId) -> LevelId {
        if self.connects[0] == level {
            self.connects[1]
        } else {
            self.connects[0]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GuideStripProps {
    /// Point the strip is meant to lead to, e.g. the edge of a crossing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleProps {
    pub subkind: String,
    pub movable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalHeadProps {
    pub lanes: Vec<String>,
    pub phases: Vec<SignalPhase>,
    #[serde(default)]
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpawnPointProps {
    pub agent: SpawnAgent,
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub goals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CrossingProps {}

/// Kind-specific properties of a feature.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureProps {
    WalkSurface(WalkSurfaceProps),
    RoadLane(LaneProps),
    TramTrack(TrackProps),
    Stop(StopProps),
    Connector(ConnectorProps),
    GuideStrip(GuideStripProps),
    Obstacle(ObstacleProps),
    SignalHead(SignalHeadProps),
    SpawnPoint(SpawnPointProps),
    Crossing(CrossingProps),
}

impl FeatureProps {
    pub fn kind(&self) -> FeatureKind {
        match self {
            FeatureProps::WalkSurface(_) => FeatureKind::WalkSurface,
            FeatureProps::RoadLane(_) => FeatureKind::RoadLane,
            FeatureProps::TramTrack(_) => FeatureKind::TramTrack,
            FeatureProps::Stop(_) => FeatureKind::Stop,
            FeatureProps::Connector(_) => FeatureKind::Connector,
            FeatureProps::GuideStrip(_) => FeatureKind::GuideStrip,
            FeatureProps::Obstacle(_) => FeatureKind::Obstacle,
            FeatureProps::SignalHead(_) => FeatureKind::SignalHead,
            FeatureProps::SpawnPoint(_) => FeatureKind::SpawnPoint,
            FeatureProps::Crossing(_) => FeatureKind::Crossing,
        }
    }

    fn parse(kind: FeatureKind, v: Value) -> Result<FeatureProps, serde_json::Error> {
        use serde_json::from_value as from;
        let v = if v.is_null() {
            Value::Object(Default::default())
        } else {
            v
        };
        Ok(match kind {
            FeatureKind::WalkSurface => FeatureProps::WalkSurface(from(v)?),
            FeatureKind::RoadLane => FeatureProps::RoadLane(from(v)?),
            FeatureKind::TramTrack => FeatureProps::TramTrack(from(v)?),
            FeatureKind::Stop => FeatureProps::Stop(from(v)?),
            FeatureKind::Connector => FeatureProps::Connector(from(v)?),
            FeatureKind::GuideStrip => FeatureProps::GuideStrip(from(v)?),
            FeatureKind::Obstacle => FeatureProps::Obstacle(from(v)?),
            FeatureKind::SignalHead => FeatureProps::SignalHead(from(v)?),
            FeatureKind::SpawnPoint => FeatureProps::SpawnPoint(from(v)?),
            FeatureKind::Crossing => FeatureProps::Crossing(from(v)?),
        })
    }

    fn to_value(&self) -> Value {
        use serde_json::to_value as to;
        match self {
            FeatureProps::WalkSurface(p) => to(p),
            FeatureProps::RoadLane(p) => to(p),
            FeatureProps::TramTrack(p) => to(p),
            FeatureProps::Stop(p) => to(p),
            FeatureProps::Connector(p) => to(p),
            FeatureProps::GuideStrip(p) => to(p),
            FeatureProps::Obstacle(p) => to(p),
            FeatureProps::SignalHead(p) => to(p),
            FeatureProps::SpawnPoint(p) => to(p),
            FeatureProps::Crossing(p) => to(p),
        }
        .expect("props serialize")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub id: String,
    pub level: LevelId,
    pub geometry: Geometry,
    pub props: FeatureProps,
}

impl Feature {
    pub fn kind(&self) -> FeatureKind {
        self.props.kind()
    }

    pub fn polygon(&self) -> Option<Polygon<'_>> {
        self.geometry.polygon()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub w: f64,
    pub h: f64,
}

impl Bounds {
    pub fn rect(&self) -> Rect {
        Rect {
            min: Vec2::ZERO,
            max: Vec2::new(self.w, self.h),
        }
    }
}

/// Immutable, validated description of the hub.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteMap {
    pub format_version: u32,
    pub name: String,
    pub bounds: Bounds,
    pub levels: BTreeSet<LevelId>,
    pub features: Vec<Feature>,
    index: BTreeMap<String, usize>,
}

#[derive(Deserialize, Serialize)]
struct RawSite {
    format_version: u32,
    name: String,
    bounds: Bounds,
    levels: Vec<LevelId>,
    features: Vec<RawFeature>,
}

#[derive(Deserialize, Serialize)]
struct RawFeature {
    id: String,
    level: LevelId,
    kind: String,
    geometry: Geometry,
    #[serde(default)]
    props: Value,
}

const KNOWN_TOP_LEVEL: [&str; 5] = ["format_version", "name", "bounds", "levels", "features"];

/// Parse and validate a site document.
pub fn load_site(bytes: &[u8]) -> Result<SiteMap, SiteError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| SiteError::MalformedDocument(format!("not UTF-8: {e}")))?;
    let doc: Value =
        serde_json::from_str(text).map_err(|e| SiteError::MalformedDocument(e.to_string()))?;
    if let Some(obj) = doc.as_object() {
        for key in obj.keys() {
            if !KNOWN_TOP_LEVEL.contains(&key.as_str()) {
                tracing::warn!(key = %key, "ignoring unknown top-level key in site document");
            }
        }
    }
    let raw: RawSite =
        serde_json::from_value(doc).map_err(|e| SiteError::MalformedDocument(e.to_string()))?;
    if raw.format_version != SITE_FORMAT_VERSION {
        return Err(SiteError::MalformedDocument(format!(
            "unsupported format_version {}",
            raw.format_version
        )));
    }
    let mut features = Vec::with_capacity(raw.features.len());
    for f in raw.features {
        let kind = FeatureKind::parse(&f.kind).ok_or_else(|| SiteError::UnknownKind {
            id: f.id.clone(),
            kind: f.kind.clone(),
        })?;
        let props = FeatureProps::parse(kind, f.props).map_err(|e| {
            SiteError::MalformedDocument(format!("props of feature `{}`: {e}", f.id))
        })?;
        features.push(Feature {
            id: f.id,
            level: f.level,
            geometry: f.geometry,
            props,
        });
    }
    SiteMap::new(raw.name, raw.bounds, raw.levels, features)
}

/// Serialize a site back to its JSON document form.
pub fn serialize_site(site: &SiteMap) -> String {
    let raw = RawSite {
        format_version: site.format_version,
        name: site.name.clone(),
        bounds: site.bounds,
        levels: site.levels.iter().copied().collect(),
        features: site
            .features
            .iter()
            .map(|f| RawFeature {
                id: f.id.clone(),
                level: f.level,
                kind: f.kind().as_str().to_string(),
                geometry: f.geometry.clone(),
                props: f.props.to_value(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("site serializes")
}

fn geometry_error(id: &str, reason: impl Into<String>) -> SiteError {
    SiteError::GeometryError {
        id: id.to_string(),
        reason: reason.into(),
    }
}

impl SiteMap {
    /// Build a site from parts, enforcing every per-feature invariant.
    pub fn new(
        name: String,
        bounds: Bounds,
        levels: Vec<LevelId>,
        features: Vec<Feature>,
    ) -> Result<SiteMap, SiteError> {
        if !(bounds.w > 0.0 && bounds.h > 0.0)
            || bounds.w > MAX_SITE_EXTENT
            || bounds.h > MAX_SITE_EXTENT
        {
            return Err(SiteError::MalformedDocument(format!(
                "bounds {}x{} outside (0, {MAX_SITE_EXTENT}] m",
                bounds.w, bounds.h
            )));
        }
        let levels: BTreeSet<LevelId> = levels.into_iter().collect();
        let rect = bounds.rect();
        let mut index = BTreeMap::new();
        for (i, f) in features.iter().enumerate() {
            if index.insert(f.id.clone(), i).is_some() {
                return Err(SiteError::MalformedDocument(format!(
                    "duplicate feature id `{}`",
                    f.id
                )));
            }
            if !levels.contains(&f.level) {
                return Err(SiteError::DanglingReference {
                    id: f.id.clone(),
                    target: format!("level {}", f.level),
                });
            }
            check_geometry(f, rect)?;
        }
        for f in &features {
            check_references(f, &features, &index, &levels)?;
        }
        Ok(SiteMap {
            format_version: SITE_FORMAT_VERSION,
            name,
            bounds,
            levels,
            features,
            index,
        })
    }

    pub fn feature(&self, id: &str) -> Option<&Feature> {
        self.index.get(id).map(|&i| &self.features[i])
    }

    pub fn features_of(&self, kind: FeatureKind) -> impl Iterator<Item = &Feature> {
        self.features.iter().filter(move |f| f.kind() == kind)
    }

    pub fn count_by_kind(&self) -> BTreeMap<FeatureKind, usize> {
        let mut out = BTreeMap::new();
        for f in &self.features {
            *out.entry(f.kind()).or_insert(0) += 1;
        }
        out
    }

    /// Polygons a pedestrian may stand on at `level` (walk surfaces and crossings).
    pub fn walkable_polygons(&self, level: LevelId) -> impl Iterator<Item = Polygon<'_>> {
        self.features
            .iter()
            .filter(move |f| {
                f.level == level
                    && matches!(f.kind(), FeatureKind::WalkSurface | FeatureKind::Crossing)
            })
            .filter_map(|f| f.polygon())
    }

    pub fn is_on_walk_surface(&self, level: LevelId, p: Vec2) -> bool {
        self.walkable_polygons(level).any(|poly| poly.contains(p))
    }

    /// Connectors whose footprint exists on `level`.
    pub fn connectors_on(
        &self,
        level: LevelId,
    ) -> impl Iterator<Item = (&Feature, &ConnectorProps)> {
        self.features.iter().filter_map(move |f| match &f.props {
            FeatureProps::Connector(c) if c.connects.contains(&level) => Some((f, c)),
            _ => None,
        })
    }

    pub fn connector(&self, id: &str) -> Option<(&Feature, &ConnectorProps)> {
        match self.feature(id) {
            Some(f) => match &f.props {
                FeatureProps::Connector(c) => Some((f, c)),
                _ => None,
            },
            None => None,
        }
    }

    /// Ids of connectors flagged non-operational.
    pub fn broken_connectors(&self) -> BTreeSet<String> {
        self.features
            .iter()
            .filter_map(|f| match &f.props {
                FeatureProps::Connector(c) if !c.operational => Some(f.id.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn lane(&self, id: &str) -> Option<(&Feature, &LaneProps)> {
        match self.feature(id).map(|f| (f, &f.props)) {
            Some((f, FeatureProps::RoadLane(p))) => Some((f, p)),
            _ => None,
        }
    }

    pub fn lane_line(&self, id: &str) -> Option<ArcPolyline> {
        self.lane(id)
            .map(|(f, _)| ArcPolyline::new(f.geometry.vertices().to_vec()))
    }

    /// Stable digest of the serialized document.
    pub fn digest(&self) -> u64 {
        crate::sim::fnv1a64(serialize_site(self).as_bytes())
    }
}

fn check_geometry(f: &Feature, rect: Rect) -> Result<(), SiteError> {
    let verts = f.geometry.vertices();
    match (&f.geometry, f.kind().wants_polygon()) {
        (Geometry::Polygon(_), false) => {
            return Err(geometry_error(&f.id, "expected a polyline"));
        }
        (Geometry::Polyline(_), true) => {
            return Err(geometry_error(&f.id, "expected a polygon"));
        }
        _ => {}
    }
    if verts.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
        return Err(geometry_error(&f.id, "non-finite coordinate"));
    }
    match &f.geometry {
        Geometry::Polyline(v) => {
            if v.len() < 2 {
                return Err(geometry_error(&f.id, "polyline needs at least 2 vertices"));
            }
            if v.windows(2).any(|w| w[0] == w[1]) {
                return Err(geometry_error(&f.id, "polyline has a zero-length segment"));
            }
        }
        Geometry::Polygon(v) => {
            if v.len() < 3 {
                return Err(geometry_error(&f.id, "polygon needs at least 3 vertices"));
            }
            if Polygon(v).self_intersects() {
                return Err(geometry_error(&f.id, "polygon self-intersects"));
            }
        }
    }
    if let Some(v) = verts.iter().find(|v| !rect.contains(**v)) {
        return Err(geometry_error(
            &f.id,
            format!("vertex ({}, {}) outside site bounds", v.x, v.y),
        ));
    }
    Ok(())
}

fn check_references(
    f: &Feature,
    features: &[Feature],
    index: &BTreeMap<String, usize>,
    levels: &BTreeSet<LevelId>,
) -> Result<(), SiteError> {
    let dangling = |target: &str| SiteError::DanglingReference {
        id: f.id.clone(),
        target: target.to_string(),
    };
    let lookup = |id: &str, kind: FeatureKind| {
        index
            .get(id)
            .map(|&i| &features[i])
            .filter(|g| g.kind() == kind)
    };
    match &f.props {
        FeatureProps::RoadLane(lane) => {
            if let Some(adj) = &lane.adjacent_lane_id {
                let other = lookup(adj, FeatureKind::RoadLane).ok_or_else(|| dangling(adj))?;
                if other.level != f.level {
                    return Err(geometry_error(&f.id, "adjacent lane is on another level"));
                }
                let a = ArcPolyline::new(f.geometry.vertices().to_vec()).mean_direction();
                let b = ArcPolyline::new(other.geometry.vertices().to_vec()).mean_direction();
                if a.dot(b) <= 0.0 {
                    return Err(geometry_error(
                        &f.id,
                        "adjacent lane runs in the opposite direction",
                    ));
                }
            }
        }
        FeatureProps::Connector(c) => {
            for l in c.connects {
                if !levels.contains(&l) {
                    return Err(dangling(&format!("level {l}")));
                }
            }
            if c.connects[0] == c.connects[1] {
                return Err(geometry_error(&f.id, "connector joins a level to itself"));
            }
            if !c.connects.contains(&f.level) {
                return Err(geometry_error(
                    &f.id,
                    "connector level is not one of the levels it connects",
                ));
            }
            if c.traversal_length.is_some_and(|l| !(l > 0.0)) {
                return Err(geometry_error(&f.id, "traversal length must be positive"));
            }
        }
        FeatureProps::SignalHead(s) => {
            for lane in &s.lanes {
                lookup(lane, FeatureKind::RoadLane).ok_or_else(|| dangling(lane))?;
            }
        }
        FeatureProps::SpawnPoint(s) => {
            if let Some(lane) = &s.lane {
                lookup(lane, FeatureKind::RoadLane).ok_or_else(|| dangling(lane))?;
            }
            for g in &s.goals {
                if lookup(g, FeatureKind::SpawnPoint)
                    .or_else(|| lookup(g, FeatureKind::Stop))
                    .is_none()
                {
                    return Err(dangling(g));
                }
            }
        }
        _ => {}
    }
    Ok(())
}
