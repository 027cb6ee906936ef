use super::nav::{NavGraph, NodeId};
use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use thiserror::Error;

const UNREACHED: u64 = u64::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("no path from node {from} to node {to}")]
    NoPath { from: NodeId, to: NodeId },
    #[error("node {0} does not exist")]
    InvalidNode(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    /// Sum of edge weights in integer micrometers.
    pub weight: u64,
    pub total_length: f64,
}

/// Exact distances (in micrometers) from every node to one target, under a
/// fixed set of excluded connectors.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub target: NodeId,
    pub exclude: BTreeSet<String>,
    dist: Vec<u64>,
}

fn excluded(exclude: &BTreeSet<String>, connector: &Option<String>) -> bool {
    connector.as_ref().is_some_and(|c| exclude.contains(c))
}

impl DistanceField {
    /// Reverse Dijkstra from `target` over the whole graph.
    pub fn toward(graph: &NavGraph, target: NodeId, exclude: &BTreeSet<String>) -> DistanceField {
        let mut dist = vec![UNREACHED; graph.node_count()];
        let mut heap = BinaryHeap::new();
        dist[target as usize] = 0;
        heap.push(Reverse((0u64, target)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u as usize] {
                continue;
            }
            for e in graph.in_edges(u) {
                if excluded(exclude, &e.requires_operational_connector) {
                    continue;
                }
                let nd = d + e.weight;
                if nd < dist[e.from as usize] {
                    dist[e.from as usize] = nd;
                    heap.push(Reverse((nd, e.from)));
                }
            }
        }
        DistanceField {
            target,
            exclude: exclude.clone(),
            dist,
        }
    }

    pub fn distance(&self, node: NodeId) -> Option<u64> {
        self.dist
            .get(node as usize)
            .copied()
            .filter(|&d| d != UNREACHED)
    }

    /// Lexicographically smallest minimum-weight path from `from` to the target.
    pub fn path_from(&self, graph: &NavGraph, from: NodeId) -> Option<Path> {
        let total = self.distance(from)?;
        let mut nodes = vec![from];
        let mut u = from;
        while u != self.target {
            let du = self.dist[u as usize];
            let next = graph
                .out_edges(u)
                .filter(|e| !excluded(&self.exclude, &e.requires_operational_connector))
                .filter(|e| {
                    let dv = self.dist[e.to as usize];
                    dv != UNREACHED && dv + e.weight == du
                })
                .min_by_key(|e| e.to)?;
            u = next.to;
            nodes.push(u);
        }
        Some(Path {
            nodes,
            weight: total,
            total_length: total as f64 / 1e6,
        })
    }
}

/// Minimum-length path with lexicographic tie-breaking on the node sequence.
/// Edges carrying a connector in `exclude` are never used.
pub fn shortest_path(
    graph: &NavGraph,
    from: NodeId,
    to: NodeId,
    exclude: &BTreeSet<String>,
) -> Result<Path, PathError> {
    let n = graph.node_count() as NodeId;
    for id in [from, to] {
        if id >= n {
            return Err(PathError::InvalidNode(id));
        }
    }
    DistanceField::toward(graph, to, exclude)
        .path_from(graph, from)
        .ok_or(PathError::NoPath { from, to })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::site::{Edge, NavMode, NavNode};

    fn unit_square() -> NavGraph {
        let pos = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        let nodes = pos
            .iter()
            .map(|&(x, y)| NavNode {
                level: 0,
                position: Vec2::new(x, y),
            })
            .collect();
        let mut edges = Vec::new();
        for (a, b) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
            edges.push(Edge::new(a, b, 1.0, None));
            edges.push(Edge::new(b, a, 1.0, None));
        }
        NavGraph::from_parts(NavMode::Walk, nodes, edges)
    }

    #[test]
    fn identity_path() {
        let g = unit_square();
        let p = shortest_path(&g, 2, 2, &BTreeSet::new()).unwrap();
        assert_eq!(p.nodes, vec![2]);
        assert_eq!(p.total_length, 0.0);
    }

    #[test]
    fn opposite_corners_take_smaller_intermediate() {
        // Both 0-1-3 and 0-2-3 have length 2; enumerating simple paths gives
        // [0,1,3] as the lexicographically smaller one.
        let g = unit_square();
        let p = shortest_path(&g, 0, 3, &BTreeSet::new()).unwrap();
        assert_eq!(p.nodes, vec![0, 1, 3]);
        assert_eq!(p.total_length, 2.0);
        let back = shortest_path(&g, 3, 0, &BTreeSet::new()).unwrap();
        assert_eq!(back.nodes, vec![3, 1, 0]);
    }

    #[test]
    fn excluded_connector_disconnects_levels() {
        let nodes = vec![
            NavNode {
                level: 0,
                position: Vec2::new(0.0, 0.0),
            },
            NavNode {
                level: -1,
                position: Vec2::new(0.0, 0.0),
            },
        ];
        let edges = vec![
            Edge::new(0, 1, 10.0, Some("E".into())),
            Edge::new(1, 0, 10.0, Some("E".into())),
        ];
        let g = NavGraph::from_parts(NavMode::Walk, nodes, edges);
        let ex = BTreeSet::from(["E".to_string()]);
        assert_eq!(
            shortest_path(&g, 0, 1, &ex),
            Err(PathError::NoPath { from: 0, to: 1 })
        );
        let p = shortest_path(&g, 0, 1, &BTreeSet::new()).unwrap();
        assert_eq!(p.nodes, vec![0, 1]);
        assert_eq!(p.total_length, 10.0);
    }

    #[test]
    fn invalid_node() {
        let g = unit_square();
        assert_eq!(
            shortest_path(&g, 0, 9, &BTreeSet::new()),
            Err(PathError::InvalidNode(9))
        );
    }
}
