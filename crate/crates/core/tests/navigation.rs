mod common;

use common::*;
use hubsim::geometry::Vec2;
use hubsim::inputs::{fixture_context, fixture_dir};
use hubsim::site::{
    build_nav_graph, load_site, serialize_site, shortest_path, validate_site, Edge, NavGraph,
    NavMode, NavNode, NodeId, PathError,
};
use proptest::prelude::*;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

/// Directed edge list: (from, to, millimetres, connector).
type RawEdges = Vec<(u32, u32, u64, Option<u8>)>;

fn graph_of(n: usize, edges: &RawEdges) -> NavGraph {
    let nodes = (0..n)
        .map(|i| NavNode {
            level: 0,
            position: Vec2::new(i as f64, 0.0),
        })
        .collect();
    let edges = edges
        .iter()
        .map(|&(a, b, mm, c)| Edge::new(a, b, mm as f64 / 1000.0, c.map(|c| format!("c{c}"))))
        .collect();
    NavGraph::from_parts(NavMode::Walk, nodes, edges)
}

/// Every simple path, by exhaustive search. Returns the minimum length and
/// the lexicographically smallest node sequence reaching it.
fn brute_force(
    n: usize,
    edges: &RawEdges,
    from: u32,
    to: u32,
    exclude: &BTreeSet<u8>,
) -> Option<(u64, Vec<u32>)> {
    #[allow(clippy::too_many_arguments)]
    fn walk(
        at: u32,
        to: u32,
        edges: &RawEdges,
        exclude: &BTreeSet<u8>,
        seen: &mut Vec<bool>,
        path: &mut Vec<u32>,
        len: u64,
        best: &mut Option<(u64, Vec<u32>)>,
    ) {
        if at == to {
            let better = match best {
                None => true,
                Some((l, p)) => len < *l || (len == *l && path < p),
            };
            if better {
                *best = Some((len, path.clone()));
            }
            return;
        }
        for &(a, b, mm, c) in edges {
            if a != at || seen[b as usize] || c.is_some_and(|c| exclude.contains(&c)) {
                continue;
            }
            seen[b as usize] = true;
            path.push(b);
            walk(b, to, edges, exclude, seen, path, len + mm, best);
            path.pop();
            seen[b as usize] = false;
        }
    }
    let mut seen = vec![false; n];
    seen[from as usize] = true;
    let mut best = None;
    walk(
        from,
        to,
        edges,
        exclude,
        &mut seen,
        &mut vec![from],
        0,
        &mut best,
    );
    best
}

fn random_graph() -> impl Strategy<Value = (usize, RawEdges, u32, u32, BTreeSet<u8>)> {
    (1usize..=12).prop_flat_map(|n| {
        let pairs: Vec<(u32, u32)> = (0..n as u32)
            .flat_map(|a| (0..n as u32).map(move |b| (a, b)))
            .filter(|(a, b)| a != b)
            .collect();
        let slots = pairs.len();
        (
            Just(n),
            Just(pairs),
            prop::collection::vec(
                prop::option::weighted(0.35, (1u64..=3000, prop::option::weighted(0.2, 0u8..3))),
                slots,
            ),
            0..n as u32,
            0..n as u32,
            prop::collection::btree_set(0u8..3, 0..3),
        )
            .prop_map(|(n, pairs, picks, from, to, exclude)| {
                let edges = pairs
                    .into_iter()
                    .zip(picks)
                    .filter_map(|((a, b), p)| p.map(|(mm, c)| (a, b, mm, c)))
                    .collect();
                (n, edges, from, to, exclude)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn shortest_path_matches_exhaustive_search((n, edges, from, to, exclude) in random_graph()) {
        let g = graph_of(n, &edges);
        let names: BTreeSet<String> = exclude.iter().map(|c| format!("c{c}")).collect();
        let got = shortest_path(&g, from, to, &names);
        match brute_force(n, &edges, from, to, &exclude) {
            None => prop_assert_eq!(got, Err(PathError::NoPath { from, to })),
            Some((mm, seq)) => {
                let p = got.expect("path exists");
                prop_assert_eq!(p.weight, mm * 1000);
                prop_assert_eq!(p.nodes, seq);
            }
        }
    }
}

#[test]
fn feature_counts_match_a_text_scan() {
    let text = std::fs::read_to_string(fixture_dir().join("site.json")).unwrap();
    let mut scanned: BTreeMap<String, usize> = BTreeMap::new();
    let mut rest = text.as_str();
    while let Some(i) = rest.find("\"kind\"") {
        rest = &rest[i + 6..];
        let open = rest.find('"').unwrap();
        let close = rest[open + 1..].find('"').unwrap();
        *scanned
            .entry(rest[open + 1..open + 1 + close].to_string())
            .or_default() += 1;
        rest = &rest[open + close + 2..];
    }
    let site = load_site(text.as_bytes()).unwrap();
    let counted: BTreeMap<String, usize> = site
        .count_by_kind()
        .into_iter()
        .map(|(k, n)| (k.as_str().to_string(), n))
        .collect();
    assert_eq!(counted, scanned);
    assert!(
        validate_site(&site).is_empty(),
        "{:?}",
        validate_site(&site)
    );
}

#[test]
fn site_round_trips_through_its_serializer() {
    let site = fixture_context().site().clone();
    let again = load_site(serialize_site(&site).as_bytes()).unwrap();
    assert_eq!(again.features, site.features);
    assert_eq!(again.bounds, site.bounds);
    assert_eq!(again.levels, site.levels);
}

#[test]
fn site_is_150_by_150_metres() {
    let site = fixture_json("site.json");
    assert_eq!(site["bounds"]["w"].as_f64(), Some(150.0));
    assert_eq!(site["bounds"]["h"].as_f64(), Some(150.0));
}

#[test]
fn walk_nodes_match_a_grid_scan() {
    let site = fixture_json("site.json");
    let features = site["features"].as_array().unwrap();
    let w = site["bounds"]["w"].as_f64().unwrap();
    let h = site["bounds"]["h"].as_f64().unwrap();
    let mut expected = 0usize;
    for level in site["levels"].as_array().unwrap() {
        let level = level.as_i64().unwrap();
        let on = |kinds: &[&str]| -> Vec<Vec<Vec2>> {
            features
                .iter()
                .filter(|f| {
                    f["level"].as_i64() == Some(level)
                        && kinds.contains(&f["kind"].as_str().unwrap())
                })
                .map(coords)
                .collect()
        };
        let surfaces = on(&["walk_surface", "crossing"]);
        let obstacles = on(&["obstacle"]);
        let mut y = 0.0;
        while y <= h {
            let mut x = 0.0;
            while x <= w {
                let p = Vec2::new(x, y);
                if surfaces.iter().any(|s| inside(s, p)) && !obstacles.iter().any(|o| inside(o, p))
                {
                    expected += 1;
                }
                x += 0.5;
            }
            y += 0.5;
        }
    }
    let g = &fixture_context().walk_graph;
    assert_eq!(g.node_count(), expected);
}

#[test]
fn graph_invariants_hold_for_every_mode() {
    let ctx = fixture_context();
    let site = ctx.site();
    for mode in [NavMode::Walk, NavMode::Road, NavMode::Tram] {
        let g = build_nav_graph(site, mode).unwrap();
        for n in &g.nodes {
            assert!(n.position.x >= 0.0 && n.position.x <= site.bounds.w);
            assert!(n.position.y >= 0.0 && n.position.y <= site.bounds.h);
        }
        for e in &g.edges {
            assert!(e.length > 0.0, "{mode:?} zero-length edge");
            let (a, b) = (g.node(e.from), g.node(e.to));
            if a.level == b.level && e.requires_operational_connector.is_none() {
                assert!((a.position.distance(b.position) - e.length).abs() < 1e-9);
            }
        }
    }
    let walk = &ctx.walk_graph;
    for n in &walk.nodes {
        assert!(site.is_on_walk_surface(n.level, n.position));
    }
    let flagged: BTreeSet<_> = walk
        .edges
        .iter()
        .filter_map(|e| e.requires_operational_connector.clone())
        .collect();
    assert_eq!(
        flagged,
        ["elev_e", "elev_w", "stairs_c"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    );
}

#[test]
fn walk_paths_are_symmetric() {
    let g = &fixture_context().walk_graph;
    let mut rng = Xoshiro256StarStar::seed_from_u64(11);
    let n = g.node_count() as u64;
    let none = BTreeSet::new();
    for _ in 0..100 {
        let a = (rng.next_u64() % n) as NodeId;
        let b = (rng.next_u64() % n) as NodeId;
        let ab = shortest_path(g, a, b, &none).unwrap();
        let ba = shortest_path(g, b, a, &none).unwrap();
        assert_eq!(ab.weight, ba.weight, "{a} <-> {b}");
    }
}

/// Textbook Dijkstra over the raw edge list.
fn dijkstra(g: &NavGraph, from: NodeId, to: NodeId, exclude: &BTreeSet<String>) -> Option<u64> {
    let mut adj: Vec<Vec<(u32, u64)>> = vec![Vec::new(); g.node_count()];
    for e in &g.edges {
        if e.requires_operational_connector
            .as_ref()
            .is_some_and(|c| exclude.contains(c))
        {
            continue;
        }
        adj[e.from as usize].push((e.to, e.weight));
    }
    let mut dist = vec![u64::MAX; g.node_count()];
    let mut heap = BinaryHeap::new();
    dist[from as usize] = 0;
    heap.push(Reverse((0u64, from)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if u == to {
            return Some(d);
        }
        if d > dist[u as usize] {
            continue;
        }
        for &(v, w) in &adj[u as usize] {
            if d + w < dist[v as usize] {
                dist[v as usize] = d + w;
                heap.push(Reverse((d + w, v)));
            }
        }
    }
    None
}

#[test]
fn descending_with_the_west_elevator_broken_uses_a_working_connector() {
    let ctx = fixture_context();
    let g = &ctx.walk_graph;
    let from = g.nearest_node(0, Vec2::new(50.0, 45.0)).unwrap();
    let to = g.nearest_node(-1, Vec2::new(46.5, 46.5)).unwrap();
    let broken: BTreeSet<String> = ["elev_w".to_string()].into();
    let path = shortest_path(g, from, to, &broken).unwrap();
    assert_eq!(Some(path.weight), dijkstra(g, from, to, &broken));
    let used: Vec<String> = path
        .nodes
        .windows(2)
        .filter_map(|w| {
            g.out_edges(w[0])
                .find(|e| e.to == w[1])
                .and_then(|e| e.requires_operational_connector.clone())
        })
        .collect();
    assert_eq!(used, ["stairs_c"]);
    // Without the exclusion the short elevator ride wins.
    let open = shortest_path(g, from, to, &BTreeSet::new()).unwrap();
    assert_eq!(Some(open.weight), dijkstra(g, from, to, &BTreeSet::new()));
    assert!(open.weight < path.weight);
}
