//! Road graph model and travel-time routing.
//!
//! Vertices carry opaque numeric ids; internally they are stored sorted by id
//! so that comparing internal index sequences is the same as comparing id
//! sequences. Every path query prices edges on a single speed snapshot:
//! `speeds[road]` is the speed (mph) of the road an edge belongs to, and the
//! cost of an edge is `length / speed` hours.

mod dijkstra;
mod yen;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use crate::{Error, Result};

pub use dijkstra::{dijkstra, shortest_path, Blocked};
pub use yen::yen_top_k;

/// A directed road segment. `road` indexes [`RoadGraph::road_ids`]; the two
/// directions of one physical road share it.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub road: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadGraph {
    vertex_ids: Vec<u32>,
    road_ids: Vec<String>,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<usize>>,
}

impl RoadGraph {
    /// Builds a graph from `(from_id, to_id, road_id, length_miles)` records.
    ///
    /// Roads are numbered in order of first appearance. The graph must be
    /// strongly connected with positive lengths.
    pub fn from_records<S: AsRef<str>>(records: &[(u32, u32, S, f64)]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset("graph has no edges".into()));
        }
        let mut vertex_ids: Vec<u32> = records.iter().flat_map(|r| [r.0, r.1]).collect();
        vertex_ids.sort_unstable();
        vertex_ids.dedup();
        let index: HashMap<u32, usize> = vertex_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();

        let mut road_ids: Vec<String> = Vec::new();
        let mut road_index: HashMap<String, usize> = HashMap::new();
        let mut edges = Vec::with_capacity(records.len());
        for (from, to, road, length) in records {
            let road = road.as_ref();
            let road = *road_index.entry(road.to_string()).or_insert_with(|| {
                road_ids.push(road.to_string());
                road_ids.len() - 1
            });
            edges.push(Edge {
                from: index[from],
                to: index[to],
                road,
                length: *length,
            });
        }
        Self::new(vertex_ids, road_ids, edges)
    }

    /// Builds a graph from already-indexed parts. `vertex_ids` must be
    /// strictly increasing.
    pub fn new(vertex_ids: Vec<u32>, road_ids: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        if vertex_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("vertex ids must be strictly increasing"));
        }
        let n = vertex_ids.len();
        let mut out_edges = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            if e.from >= n || e.to >= n || e.road >= road_ids.len() {
                return Err(Error::Format(format!(
                    "edge {i} references an unknown vertex or road"
                )));
            }
            if e.from == e.to {
                return Err(Error::Format(format!("edge {i} is a self-loop")));
            }
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(Error::Format(format!(
                    "edge {i} has non-positive length {}",
                    e.length
                )));
            }
            out_edges[e.from].push(i);
        }
        let graph = RoadGraph {
            vertex_ids,
            road_ids,
            edges,
            out_edges,
        };
        if !graph.is_strongly_connected() {
            return Err(Error::Format("graph is not strongly connected".into()));
        }
        Ok(graph)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn n_roads(&self) -> usize {
        self.road_ids.len()
    }

    pub fn vertex_ids(&self) -> &[u32] {
        &self.vertex_ids
    }

    pub fn vertex_id(&self, v: usize) -> u32 {
        self.vertex_ids[v]
    }

    pub fn vertex_index(&self, id: u32) -> Option<usize> {
        self.vertex_ids.binary_search(&id).ok()
    }

    pub fn road_ids(&self) -> &[String] {
        &self.road_ids
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    pub fn is_strongly_connected(&self) -> bool {
        let n = self.n_vertices();
        if n == 0 {
            return false;
        }
        let mut reverse = vec![Vec::new(); n];
        for e in &self.edges {
            reverse[e.to].push(e.from);
        }
        let forward: Vec<Vec<usize>> = self
            .out_edges
            .iter()
            .map(|es| es.iter().map(|&e| self.edges[e].to).collect())
            .collect();
        reaches_all(&forward, 0) && reaches_all(&reverse, 0)
    }

    /// Validates a speed snapshot and turns it into per-edge travel times.
    pub fn edge_costs(&self, speeds: &[f64]) -> Result<Vec<f64>> {
        if speeds.len() != self.n_roads() {
            return Err(Error::DimensionMismatch {
                expected: self.n_roads(),
                got: speeds.len(),
            });
        }
        self.edges.iter().map(|e| edge_cost(e, speeds)).collect()
    }

    /// Travel time of an edge sequence, summed from the origin outwards.
    pub fn path_cost(&self, edges: &[usize], speeds: &[f64]) -> Result<f64> {
        let mut cost = 0.0;
        for &e in edges {
            cost += edge_cost(&self.edges[e], speeds)?;
        }
        Ok(cost)
    }

    /// Builds a [`PathResult`] for a connected edge sequence priced on `speeds`.
    pub fn path_from_edges(&self, edges: Vec<usize>, speeds: &[f64]) -> Result<PathResult> {
        let Some(&first) = edges.first() else {
            return Err(Error::invalid("a path needs at least one edge"));
        };
        let mut vertices = vec![self.edges[first].from];
        for &e in &edges {
            let edge = &self.edges[e];
            if edge.from != *vertices.last().unwrap() {
                return Err(Error::invalid("edge sequence is not connected"));
            }
            vertices.push(edge.to);
        }
        let cost = self.path_cost(&edges, speeds)?;
        Ok(PathResult {
            edges,
            vertices,
            cost,
        })
    }

    /// Maps each graph road to its row in a list of field road ids.
    pub fn align_roads<S: AsRef<str>>(&self, field_road_ids: &[S]) -> Result<Vec<usize>> {
        let index: BTreeMap<&str, usize> = field_road_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_ref(), i))
            .collect();
        self.road_ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnknownRoad(id.clone()))
            })
            .collect()
    }
}

fn reaches_all(adj: &[Vec<usize>], start: usize) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == adj.len()
}

/// Travel time in hours of one edge at the speed of its road.
pub fn edge_cost(edge: &Edge, speeds: &[f64]) -> Result<f64> {
    let speed = *speeds
        .get(edge.road)
        .ok_or_else(|| Error::invalid(format!("no speed for road {}", edge.road)))?;
    if !(speed.is_finite() && speed > 0.0) {
        return Err(Error::invalid(format!(
            "road {} has non-positive speed {speed}",
            edge.road
        )));
    }
    Ok(edge.length / speed)
}

/// A loopless origin-to-destination path and its travel time in hours.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub edges: Vec<usize>,
    /// Internal vertex indices, origin first; one longer than `edges`.
    pub vertices: Vec<usize>,
    pub cost: f64,
}

impl PathResult {
    pub fn origin(&self) -> usize {
        self.vertices[0]
    }

    pub fn destination(&self) -> usize {
        *self.vertices.last().unwrap()
    }

    pub fn is_loopless(&self) -> bool {
        let mut seen = self.vertices.clone();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }

    /// Total order used for every tie-break: cost, then vertex sequence, then
    /// edge sequence.
    pub fn route_order(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then_with(|| self.vertices.cmp(&other.vertices))
            .then_with(|| self.edges.cmp(&other.edges))
    }
}
