//! Random graphs and exhaustive path enumeration shared by the router suites.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use roadcast::router::{Edge, RoadGraph};

/// A strongly connected digraph on `2..=max_vertices` vertices: a random
/// Hamiltonian cycle plus extra edges (parallel ones allowed) up to
/// `max_edges`. Each edge is its own road. With `integral`, lengths are small
/// integers and every speed is 1, which makes equal-cost paths common.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    max_vertices: usize,
    max_edges: usize,
    integral: bool,
) -> (RoadGraph, Vec<f64>) {
    let n = rng.random_range(2..=max_vertices);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pairs: Vec<(usize, usize)> = (0..n).map(|i| (order[i], order[(i + 1) % n])).collect();
    let total = rng.random_range(n..=max_edges.max(n));
    while pairs.len() < total {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            pairs.push((a, b));
        }
    }
    let mut edges = Vec::new();
    let mut speeds = Vec::new();
    for (i, &(from, to)) in pairs.iter().enumerate() {
        let (length, speed) = if integral {
            (f64::from(rng.random_range(1..=4u32)), 1.0)
        } else {
            (rng.random_range(0.1..5.0), rng.random_range(5.0..70.0))
        };
        edges.push(Edge {
            from,
            to,
            road: i,
            length,
        });
        speeds.push(speed);
    }
    let road_ids = (0..edges.len()).map(|i| format!("e{i}")).collect();
    let graph = RoadGraph::new((0..n as u32).collect(), road_ids, edges).unwrap();
    (graph, speeds)
}

/// Every simple path from `origin` to `destination` as
/// `(cost, vertex sequence, edge sequence)`, sorted.
pub fn all_simple_paths(
    graph: &RoadGraph,
    speeds: &[f64],
    origin: usize,
    destination: usize,
) -> Vec<(f64, Vec<usize>, Vec<usize>)> {
    fn walk(
        graph: &RoadGraph,
        speeds: &[f64],
        destination: usize,
        vertices: &mut Vec<usize>,
        edges: &mut Vec<usize>,
        out: &mut Vec<(f64, Vec<usize>, Vec<usize>)>,
    ) {
        let here = *vertices.last().unwrap();
        if here == destination {
            let mut cost = 0.0;
            for &e in edges.iter() {
                let edge = graph.edge(e);
                cost += edge.length / speeds[edge.road];
            }
            out.push((cost, vertices.clone(), edges.clone()));
            return;
        }
        for &e in graph.out_edges(here) {
            let next = graph.edge(e).to;
            if vertices.contains(&next) {
                continue;
            }
            vertices.push(next);
            edges.push(e);
            walk(graph, speeds, destination, vertices, edges, out);
            vertices.pop();
            edges.pop();
        }
    }
    let mut out = Vec::new();
    walk(
        graph,
        speeds,
        destination,
        &mut vec![origin],
        &mut Vec::new(),
        &mut out,
    );
    out.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(&b.2))
    });
    out
}
