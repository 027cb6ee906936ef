use super::{FeatureKind, FeatureProps, LevelId, SiteMap};
use crate::geometry::Vec2;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// Sampling pitch for guide-strip containment checks, meters.
const STRIP_SAMPLE_PITCH: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub feature: String,
    pub message: String,
}

pub type ValidationReport = Vec<ValidationIssue>;

fn error(feature: &str, message: impl Into<String>) -> ValidationIssue {
    ValidationIssue {
        severity: Severity::Error,
        feature: feature.to_string(),
        message: message.into(),
    }
}

/// Check cross-feature consistency rules. An empty report means the site is
/// fully consistent.
pub fn validate_site(site: &SiteMap) -> ValidationReport {
    let mut report = Vec::new();
    check_stops(site, &mut report);
    check_level_reachability(site, &mut report);
    check_guide_strips(site, &mut report);
    report
}

fn check_stops(site: &SiteMap, report: &mut ValidationReport) {
    for stop in site.features_of(FeatureKind::Stop) {
        let Some(poly) = stop.polygon() else { continue };
        let served = site.features.iter().any(|f| {
            f.level == stop.level
                && matches!(f.kind(), FeatureKind::TramTrack | FeatureKind::RoadLane)
                && poly.touches_polyline(f.geometry.vertices())
        });
        if !served {
            report.push(error(
                &stop.id,
                "stop does not intersect any tram_track or road_lane",
            ));
        }
    }
}

fn check_level_reachability(site: &SiteMap, report: &mut ValidationReport) {
    let used: BTreeSet<LevelId> = site.features.iter().map(|f| f.level).collect();
    let mut links: BTreeMap<LevelId, BTreeSet<LevelId>> = BTreeMap::new();
    for f in &site.features {
        if let FeatureProps::Connector(c) = &f.props {
            links
                .entry(c.connects[0])
                .or_default()
                .insert(c.connects[1]);
            links
                .entry(c.connects[1])
                .or_default()
                .insert(c.connects[0]);
        }
    }
    let mut reached = BTreeSet::from([0]);
    let mut stack = vec![0];
    while let Some(l) = stack.pop() {
        for &n in links.get(&l).into_iter().flatten() {
            if reached.insert(n) {
                stack.push(n);
            }
        }
    }
    for level in used.difference(&reached) {
        report.push(error(
            &format!("level:{level}"),
            format!("level {level} unreachable"),
        ));
    }
}

fn check_guide_strips(site: &SiteMap, report: &mut ValidationReport) {
    for strip in site.features_of(FeatureKind::GuideStrip) {
        let line = strip.geometry.vertices();
        if let Some(p) = sample_polyline(line, STRIP_SAMPLE_PITCH)
            .into_iter()
            .find(|&p| !site.is_on_walk_surface(strip.level, p))
        {
            report.push(error(
                &strip.id,
                format!(
                    "guide strip leaves the walk surfaces of level {} at ({:.2}, {:.2})",
                    strip.level, p.x, p.y
                ),
            ));
        }
    }
}

/// Points along a polyline every `pitch` meters, including every vertex.
pub(crate) fn sample_polyline(line: &[Vec2], pitch: f64) -> Vec<Vec2> {
    let mut out = Vec::new();
    for w in line.windows(2) {
        let len = w[0].distance(w[1]);
        let n = (len / pitch).ceil().max(1.0) as usize;
        for i in 0..n {
            out.push(w[0].lerp(w[1], i as f64 / n as f64));
        }
    }
    if let Some(&last) = line.last() {
        out.push(last);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::site::load_site;

    fn site(levels: &str, features: &str) -> SiteMap {
        let text = format!(
            r#"{{"format_version":1,"name":"t","bounds":{{"w":20,"h":20}},"levels":{levels},"features":[{features}]}}"#
        );
        load_site(text.as_bytes()).unwrap()
    }

    #[test]
    fn disjoint_stop_is_reported() {
        let s = site(
            "[0]",
            r#"{"id":"trk","level":0,"kind":"tram_track","geometry":{"type":"polyline","coords":[[0,1],[20,1]]}},
               {"id":"st","level":0,"kind":"stop","geometry":{"type":"polygon","coords":[[5,10],[8,10],[8,12],[5,12]]},"props":{"line_ids":["T"]}}"#,
        );
        let report = validate_site(&s);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].feature, "st");
    }

    #[test]
    fn unreachable_underground_level() {
        let s = site(
            "[0,-1]",
            r#"{"id":"hall","level":-1,"kind":"walk_surface","geometry":{"type":"polygon","coords":[[0,0],[10,0],[10,10],[0,10]]}}"#,
        );
        let report = validate_site(&s);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].message, "level -1 unreachable");
    }

    #[test]
    fn strip_off_surface_is_reported() {
        let s = site(
            "[0]",
            r#"{"id":"ws","level":0,"kind":"walk_surface","geometry":{"type":"polygon","coords":[[0,0],[10,0],[10,10],[0,10]]}},
               {"id":"gs","level":0,"kind":"guide_strip","geometry":{"type":"polyline","coords":[[1,5],[15,5]]}}"#,
        );
        let report = validate_site(&s);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].feature, "gs");
    }
}
