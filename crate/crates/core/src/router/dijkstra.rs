use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{PathResult, RoadGraph};
use crate::{Error, Result};

/// Vertices and edges excluded from a search (Yen's spur computations).
#[derive(Debug, Clone)]
pub struct Blocked {
    pub vertices: Vec<bool>,
    pub edges: Vec<bool>,
}

impl Blocked {
    pub fn none(graph: &RoadGraph) -> Self {
        Blocked {
            vertices: vec![false; graph.n_vertices()],
            edges: vec![false; graph.edges().len()],
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    cost: f64,
    vertex: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // min-heap on cost
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

/// Single-pair shortest path over precomputed per-edge costs.
///
/// Among equal-cost paths the one with the lexicographically smallest vertex
/// sequence wins, then the smallest edge sequence. Returns `None` when the
/// destination is unreachable under `blocked`.
pub fn shortest_path(
    graph: &RoadGraph,
    costs: &[f64],
    origin: usize,
    destination: usize,
    blocked: Option<&Blocked>,
) -> Option<PathResult> {
    let n = graph.n_vertices();
    let vertex_ok = |v: usize| blocked.is_none_or(|b| !b.vertices[v]);
    let edge_ok = |e: usize| blocked.is_none_or(|b| !b.edges[e]);
    if !vertex_ok(origin) || !vertex_ok(destination) {
        return None;
    }

    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[origin] = 0.0;
    heap.push(Entry {
        cost: 0.0,
        vertex: origin,
    });

    while let Some(Entry { cost, vertex: u }) = heap.pop() {
        if settled[u] || cost > dist[u] {
            continue;
        }
        settled[u] = true;
        if u == destination {
            break;
        }
        for &e in graph.out_edges(u) {
            if !edge_ok(e) {
                continue;
            }
            let v = graph.edge(e).to;
            if settled[v] || !vertex_ok(v) {
                continue;
            }
            let candidate = cost + costs[e];
            if candidate < dist[v] {
                dist[v] = candidate;
                pred[v] = Some(e);
                heap.push(Entry {
                    cost: candidate,
                    vertex: v,
                });
            } else if candidate == dist[v] {
                let current = pred[v].expect("finite distance has a predecessor");
                if prefers(graph, &pred, e, current) {
                    pred[v] = Some(e);
                }
            }
        }
    }

    if !settled[destination] {
        return None;
    }
    let (vertices, edges) = trace(graph, &pred, destination);
    Some(PathResult {
        edges,
        vertices,
        cost: dist[destination],
    })
}

/// Shortest path priced on a speed snapshot; `origin != destination`.
pub fn dijkstra(
    graph: &RoadGraph,
    origin: usize,
    destination: usize,
    speeds: &[f64],
) -> Result<PathResult> {
    check_endpoints(graph, origin, destination)?;
    let costs = graph.edge_costs(speeds)?;
    shortest_path(graph, &costs, origin, destination, None).ok_or(Error::Unreachable {
        from: graph.vertex_id(origin),
        to: graph.vertex_id(destination),
    })
}

pub(super) fn check_endpoints(graph: &RoadGraph, origin: usize, destination: usize) -> Result<()> {
    let n = graph.n_vertices();
    if origin >= n || destination >= n {
        return Err(Error::invalid(format!(
            "vertex index out of range ({origin}, {destination}) for {n} vertices"
        )));
    }
    if origin == destination {
        return Err(Error::invalid("origin and destination must differ"));
    }
    Ok(())
}

fn trace(graph: &RoadGraph, pred: &[Option<usize>], v: usize) -> (Vec<usize>, Vec<usize>) {
    let mut edges = Vec::new();
    let mut at = v;
    while let Some(e) = pred[at] {
        edges.push(e);
        at = graph.edge(e).from;
    }
    edges.reverse();
    let mut vertices = Vec::with_capacity(edges.len() + 1);
    vertices.push(at);
    vertices.extend(edges.iter().map(|&e| graph.edge(e).to));
    (vertices, edges)
}

/// Whether reaching `edge.to` through `candidate` beats the path through
/// `current` under the (vertex sequence, edge sequence) tie-break.
fn prefers(graph: &RoadGraph, pred: &[Option<usize>], candidate: usize, current: usize) -> bool {
    let (mut va, mut ea) = trace(graph, pred, graph.edge(candidate).from);
    let (mut vb, mut eb) = trace(graph, pred, graph.edge(current).from);
    ea.push(candidate);
    eb.push(current);
    va.push(graph.edge(candidate).to);
    vb.push(graph.edge(current).to);
    (va, ea) < (vb, eb)
}
