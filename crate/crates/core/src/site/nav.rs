use super::{FeatureKind, FeatureProps, LevelId, SiteMap};
use crate::geometry::{ArcPolyline, Polygon, Vec2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub type NodeId = u32;

/// Walk-graph grid pitch in meters.
pub const WALK_PITCH: f64 = 0.5;

const ARC_EPS: f64 = 1e-6;
const NO_NODE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavMode {
    Walk,
    Road,
    Tram,
}

#[derive(Debug, Error, PartialEq)]
pub enum NavError {
    #[error("no {0:?} features to build a graph from")]
    EmptyGraph(NavMode),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavNode {
    pub level: LevelId,
    pub position: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub length: f64,
    /// Length in integer micrometers; routing sums these so ties are exact.
    pub weight: u64,
    /// Connector feature that must be operational to traverse this edge.
    pub requires_operational_connector: Option<String>,
}

impl Edge {
    pub fn new(from: NodeId, to: NodeId, length: f64, connector: Option<String>) -> Edge {
        Edge {
            from,
            to,
            length,
            weight: (length * 1e6).round() as u64,
            requires_operational_connector: connector,
        }
    }
}

#[derive(Debug, Clone)]
struct LevelGrid {
    level: LevelId,
    cols: usize,
    rows: usize,
    cells: Vec<u32>,
}

/// Navigation graph for one travel mode. Node ids are dense `0..N`.
#[derive(Debug, Clone)]
pub struct NavGraph {
    pub mode: NavMode,
    pub nodes: Vec<NavNode>,
    pub edges: Vec<Edge>,
    pub built_from: u64,
    out_start: Vec<u32>,
    out_list: Vec<u32>,
    in_start: Vec<u32>,
    in_list: Vec<u32>,
    grids: Vec<LevelGrid>,
    lane_nodes: BTreeMap<String, Vec<(f64, NodeId)>>,
    stop_nodes: BTreeMap<String, NodeId>,
}

fn csr(n: usize, edges: &[Edge], key: impl Fn(&Edge) -> NodeId) -> (Vec<u32>, Vec<u32>) {
    let mut start = vec![0u32; n + 1];
    for e in edges {
        start[key(e) as usize + 1] += 1;
    }
    for i in 0..n {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut list = vec![0u32; edges.len()];
    for (i, e) in edges.iter().enumerate() {
        let k = key(e) as usize;
        list[fill[k] as usize] = i as u32;
        fill[k] += 1;
    }
    (start, list)
}

impl NavGraph {
    /// Assemble a graph from explicit nodes and edges.
    pub fn from_parts(mode: NavMode, nodes: Vec<NavNode>, edges: Vec<Edge>) -> NavGraph {
        NavGraph::assemble(
            mode,
            nodes,
            edges,
            0,
            Vec::new(),
            BTreeMap::new(),
            BTreeMap::new(),
        )
    }

    fn assemble(
        mode: NavMode,
        nodes: Vec<NavNode>,
        edges: Vec<Edge>,
        built_from: u64,
        grids: Vec<LevelGrid>,
        lane_nodes: BTreeMap<String, Vec<(f64, NodeId)>>,
        stop_nodes: BTreeMap<String, NodeId>,
    ) -> NavGraph {
        let n = nodes.len();
        let (out_start, out_list) = csr(n, &edges, |e| e.from);
        let (in_start, in_list) = csr(n, &edges, |e| e.to);
        NavGraph {
            mode,
            nodes,
            edges,
            built_from,
            out_start,
            out_list,
            in_start,
            in_list,
            grids,
            lane_nodes,
            stop_nodes,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> &NavNode {
        &self.nodes[id as usize]
    }

    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> {
        let (a, b) = (
            self.out_start[id as usize] as usize,
            self.out_start[id as usize + 1] as usize,
        );
        self.out_list[a..b].iter().map(|&i| &self.edges[i as usize])
    }

    pub fn in_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> {
        let (a, b) = (
            self.in_start[id as usize] as usize,
            self.in_start[id as usize + 1] as usize,
        );
        self.in_list[a..b].iter().map(|&i| &self.edges[i as usize])
    }

    fn grid(&self, level: LevelId) -> Option<&LevelGrid> {
        self.grids.iter().find(|g| g.level == level)
    }

    /// Walk-graph node sitting exactly on the grid point nearest to `p`, if any.
    pub fn node_at(&self, level: LevelId, p: Vec2) -> Option<NodeId> {
        let g = self.grid(level)?;
        let i = (p.x / WALK_PITCH).round();
        let j = (p.y / WALK_PITCH).round();
        if i < 0.0 || j < 0.0 || i as usize >= g.cols || j as usize >= g.rows {
            return None;
        }
        let id = g.cells[j as usize * g.cols + i as usize];
        (id != NO_NODE).then_some(id)
    }

    /// Nearest node on `level` to `p` (ties to the smaller id).
    pub fn nearest_node(&self, level: LevelId, p: Vec2) -> Option<NodeId> {
        if let Some(g) = self.grid(level) {
            return self.nearest_grid_node(g, p);
        }
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.level == level)
            .map(|(i, n)| (n.position.distance(p), i as NodeId))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, i)| i)
    }

    fn nearest_grid_node(&self, g: &LevelGrid, p: Vec2) -> Option<NodeId> {
        let ci = (p.x / WALK_PITCH).round() as i64;
        let cj = (p.y / WALK_PITCH).round() as i64;
        let max_r = g.cols.max(g.rows) as i64;
        let mut found_ring = None;
        let mut best: Option<(f64, NodeId)> = None;
        let mut r = 0i64;
        while r <= max_r {
            if let Some(limit) = found_ring {
                if r > limit {
                    break;
                }
            }
            for j in (cj - r)..=(cj + r) {
                for i in (ci - r)..=(ci + r) {
                    if (i - ci).abs() != r && (j - cj).abs() != r {
                        continue;
                    }
                    if i < 0 || j < 0 || i as usize >= g.cols || j as usize >= g.rows {
                        continue;
                    }
                    let id = g.cells[j as usize * g.cols + i as usize];
                    if id == NO_NODE {
                        continue;
                    }
                    let d = self.nodes[id as usize].position.distance(p);
                    if best.is_none_or(|(bd, bid)| d < bd || (d == bd && id < bid)) {
                        best = Some((d, id));
                    }
                }
            }
            if best.is_some() && found_ring.is_none() {
                found_ring = Some((r as f64 * std::f64::consts::SQRT_2).ceil() as i64 + 1);
            }
            r += 1;
        }
        best.map(|(_, id)| id)
    }

    /// Node inside `poly` on `level` nearest to `target`.
    pub fn nearest_node_in(
        &self,
        level: LevelId,
        poly: &Polygon<'_>,
        target: Vec2,
    ) -> Option<NodeId> {
        let mut best: Option<(f64, NodeId)> = None;
        if let Some(g) = self.grid(level) {
            let (mut lo, mut hi) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
            for v in poly.0 {
                lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
                hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
            }
            let i0 = (lo.x / WALK_PITCH).floor().max(0.0) as usize;
            let j0 = (lo.y / WALK_PITCH).floor().max(0.0) as usize;
            let i1 = ((hi.x / WALK_PITCH).ceil() as usize).min(g.cols.saturating_sub(1));
            let j1 = ((hi.y / WALK_PITCH).ceil() as usize).min(g.rows.saturating_sub(1));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let id = g.cells[j * g.cols + i];
                    if id == NO_NODE {
                        continue;
                    }
                    let pos = self.nodes[id as usize].position;
                    if !poly.contains(pos) {
                        continue;
                    }
                    let d = pos.distance(target);
                    if best.is_none_or(|(bd, bid)| d < bd || (d == bd && id < bid)) {
                        best = Some((d, id));
                    }
                }
            }
        } else {
            for (i, n) in self.nodes.iter().enumerate() {
                if n.level == level && poly.contains(n.position) {
                    let d = n.position.distance(target);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, i as NodeId));
                    }
                }
            }
        }
        best.map(|(_, id)| id)
    }

    /// Road-graph nodes of a lane as `(arc-length, node)` pairs in lane order.
    pub fn lane_nodes(&self, lane: &str) -> &[(f64, NodeId)] {
        self.lane_nodes.get(lane).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Tram-graph node inserted for a stop.
    pub fn stop_node(&self, stop: &str) -> Option<NodeId> {
        self.stop_nodes.get(stop).copied()
    }
}

/// Build the navigation graph for `mode` from the site as authored.
pub fn build_nav_graph(site: &SiteMap, mode: NavMode) -> Result<NavGraph, NavError> {
    match mode {
        NavMode::Walk => build_walk_graph_with(site, &BTreeMap::new()),
        NavMode::Road => build_line_graph(site, NavMode::Road),
        NavMode::Tram => build_line_graph(site, NavMode::Tram),
    }
}

/// Build the walk graph with obstacle footprints shifted by the given offsets
/// (runtime geometry after obstacles have been moved).
pub fn build_walk_graph_with(
    site: &SiteMap,
    obstacle_offsets: &BTreeMap<String, Vec2>,
) -> Result<NavGraph, NavError> {
    let cols = (site.bounds.w / WALK_PITCH).floor() as usize + 1;
    let rows = (site.bounds.h / WALK_PITCH).floor() as usize + 1;
    let mut nodes = Vec::new();
    let mut grids = Vec::new();
    for &level in &site.levels {
        let surfaces: Vec<Polygon<'_>> = site.walkable_polygons(level).collect();
        let obstacles: Vec<Vec<Vec2>> = site
            .features_of(FeatureKind::Obstacle)
            .filter(|f| f.level == level)
            .map(|f| {
                let off = obstacle_offsets.get(&f.id).copied().unwrap_or(Vec2::ZERO);
                f.geometry.vertices().iter().map(|&v| v + off).collect()
            })
            .collect();
        let mut cells = vec![NO_NODE; cols * rows];
        if !surfaces.is_empty() {
            for j in 0..rows {
                for i in 0..cols {
                    let p = Vec2::new(i as f64 * WALK_PITCH, j as f64 * WALK_PITCH);
                    if surfaces.iter().any(|s| s.contains(p))
                        && !obstacles.iter().any(|o| Polygon(o).contains(p))
                    {
                        cells[j * cols + i] = nodes.len() as NodeId;
                        nodes.push(NavNode { level, position: p });
                    }
                }
            }
        }
        grids.push(LevelGrid {
            level,
            cols,
            rows,
            cells,
        });
    }
    if nodes.is_empty() {
        return Err(NavError::EmptyGraph(NavMode::Walk));
    }
    let mut edges = Vec::with_capacity(nodes.len() * 8);
    const DIRS: [(i64, i64); 8] = [
        (-1, -1),
        (0, -1),
        (1, -1),
        (-1, 0),
        (1, 0),
        (-1, 1),
        (0, 1),
        (1, 1),
    ];
    for g in &grids {
        for j in 0..rows {
            for i in 0..cols {
                let from = g.cells[j * cols + i];
                if from == NO_NODE {
                    continue;
                }
                for (di, dj) in DIRS {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni < 0 || nj < 0 || ni as usize >= cols || nj as usize >= rows {
                        continue;
                    }
                    let to = g.cells[nj as usize * cols + ni as usize];
                    if to == NO_NODE {
                        continue;
                    }
                    // Diagonals must not cut a corner of the walkable area.
                    if di != 0
                        && dj != 0
                        && (g.cells[j * cols + ni as usize] == NO_NODE
                            || g.cells[nj as usize * cols + i] == NO_NODE)
                    {
                        continue;
                    }
                    let len = nodes[from as usize]
                        .position
                        .distance(nodes[to as usize].position);
                    edges.push(Edge::new(from, to, len, None));
                }
            }
        }
    }
    let mut graph = NavGraph::assemble(
        NavMode::Walk,
        nodes,
        Vec::new(),
        site.digest(),
        grids,
        BTreeMap::new(),
        BTreeMap::new(),
    );
    for f in site.features_of(FeatureKind::Connector) {
        let FeatureProps::Connector(c) = &f.props else {
            continue;
        };
        let poly = Polygon(f.geometry.vertices());
        let centroid = poly.centroid();
        let a = graph.nearest_node_in(c.connects[0], &poly, centroid);
        let b = graph.nearest_node_in(c.connects[1], &poly, centroid);
        if let (Some(a), Some(b)) = (a, b) {
            let len = c.traversal_length();
            edges.push(Edge::new(a, b, len, Some(f.id.clone())));
            edges.push(Edge::new(b, a, len, Some(f.id.clone())));
        }
    }
    let NavGraph { nodes, grids, .. } = graph;
    graph = NavGraph::assemble(
        NavMode::Walk,
        nodes,
        edges,
        site.digest(),
        grids,
        BTreeMap::new(),
        BTreeMap::new(),
    );
    Ok(graph)
}

fn insert_arc(set: &mut Vec<f64>, s: f64) {
    if !set.iter().any(|&x| (x - s).abs() < ARC_EPS) {
        set.push(s);
    }
}

fn build_line_graph(site: &SiteMap, mode: NavMode) -> Result<NavGraph, NavError> {
    let kind = match mode {
        NavMode::Road => FeatureKind::RoadLane,
        _ => FeatureKind::TramTrack,
    };
    let lines: Vec<(&str, LevelId, ArcPolyline)> = site
        .features_of(kind)
        .map(|f| {
            (
                f.id.as_str(),
                f.level,
                ArcPolyline::new(f.geometry.vertices().to_vec()),
            )
        })
        .collect();
    if lines.is_empty() {
        return Err(NavError::EmptyGraph(mode));
    }
    let mut arcs: Vec<Vec<f64>> = lines.iter().map(|(_, _, l)| l.cumulative.clone()).collect();
    let position = |id: &str| lines.iter().position(|(n, _, _)| *n == id);
    let mut adjacency: Vec<Option<usize>> = vec![None; lines.len()];
    let mut stop_arcs: Vec<(String, usize, f64)> = Vec::new();
    if mode == NavMode::Road {
        for (i, (id, _, _)) in lines.iter().enumerate() {
            if let Some((_, props)) = site.lane(id) {
                adjacency[i] = props.adjacent_lane_id.as_deref().and_then(position);
            }
        }
        for (a, adj) in adjacency.iter().enumerate() {
            let Some(b) = *adj else { continue };
            let (la, lb) = (&lines[a].2, &lines[b].2);
            for p in la.points.clone() {
                insert_arc(&mut arcs[b], lb.project(p));
            }
            for p in lb.points.clone() {
                insert_arc(&mut arcs[a], la.project(p));
            }
        }
    } else {
        for stop in site.features_of(FeatureKind::Stop) {
            let Some(poly) = stop.polygon() else { continue };
            let centroid = poly.centroid();
            if let Some(i) = lines
                .iter()
                .position(|(_, lvl, l)| *lvl == stop.level && poly.touches_polyline(&l.points))
            {
                let s = lines[i].2.project(centroid);
                insert_arc(&mut arcs[i], s);
                stop_arcs.push((stop.id.clone(), i, s));
            }
        }
    }
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut lane_nodes: BTreeMap<String, Vec<(f64, NodeId)>> = BTreeMap::new();
    for (i, (id, level, line)) in lines.iter().enumerate() {
        let mut set = arcs[i].clone();
        set.sort_by(f64::total_cmp);
        let mut list = Vec::with_capacity(set.len());
        for s in set {
            let nid = nodes.len() as NodeId;
            nodes.push(NavNode {
                level: *level,
                position: line.point_at(s),
            });
            list.push((s, nid));
        }
        for w in list.windows(2) {
            let len = nodes[w[0].1 as usize]
                .position
                .distance(nodes[w[1].1 as usize].position);
            if len > 0.0 {
                edges.push(Edge::new(w[0].1, w[1].1, len, None));
            }
        }
        lane_nodes.insert(id.to_string(), list);
    }
    for (a, adj) in adjacency.iter().enumerate() {
        let Some(b) = *adj else { continue };
        let (from_list, to_list) = (&lane_nodes[lines[a].0], &lane_nodes[lines[b].0]);
        for &(_, from) in from_list {
            let p = nodes[from as usize].position;
            let sb = lines[b].2.project(p);
            if let Some(&(_, to)) = to_list.iter().find(|(s, _)| (s - sb).abs() < ARC_EPS) {
                let len = p.distance(nodes[to as usize].position);
                if len > 0.0 {
                    edges.push(Edge::new(from, to, len, None));
                }
            }
        }
    }
    let mut stop_nodes = BTreeMap::new();
    for (stop, i, s) in stop_arcs {
        if let Some(&(_, nid)) = lane_nodes[lines[i].0]
            .iter()
            .find(|(x, _)| (x - s).abs() < ARC_EPS)
        {
            stop_nodes.entry(stop).or_insert(nid);
        }
    }
    Ok(NavGraph::assemble(
        mode,
        nodes,
        edges,
        site.digest(),
        Vec::new(),
        lane_nodes,
        stop_nodes,
    ))
}
