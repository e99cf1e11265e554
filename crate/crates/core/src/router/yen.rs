//! Loopless Top-K shortest paths (Yen's deviation method).
//!
//! Each accepted path is re-examined at every vertex but the destination: the
//! prefix up to that vertex is kept as the root, root vertices are removed,
//! and every edge by which an already-accepted path sharing the same root
//! leaves the spur vertex is blocked. The cheapest remaining spur path,
//! appended to the root, is a candidate. Candidates are deduplicated and the
//! best one under [`PathResult::route_order`] is accepted next.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};

use super::dijkstra::{check_endpoints, shortest_path, Blocked};
use super::{PathResult, RoadGraph};
use crate::{Error, Result};

struct Candidate(PathResult);

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.route_order(&other.0)
    }
}

/// The `k` cheapest loopless paths from `origin` to `destination`, cheapest
/// first. Fewer are returned when the graph has fewer simple paths.
pub fn yen_top_k(
    graph: &RoadGraph,
    origin: usize,
    destination: usize,
    k: usize,
    speeds: &[f64],
) -> Result<Vec<PathResult>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    check_endpoints(graph, origin, destination)?;
    let costs = graph.edge_costs(speeds)?;
    let first =
        shortest_path(graph, &costs, origin, destination, None).ok_or(Error::Unreachable {
            from: graph.vertex_id(origin),
            to: graph.vertex_id(destination),
        })?;

    let mut accepted = vec![first];
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    seen.insert(accepted[0].edges.clone());
    let mut candidates: BTreeSet<Candidate> = BTreeSet::new();
    let mut blocked = Blocked::none(graph);

    while accepted.len() < k {
        let last = accepted.last().unwrap();
        for i in 0..last.edges.len() {
            let spur = last.vertices[i];
            let root = &last.edges[..i];

            blocked.vertices.iter_mut().for_each(|b| *b = false);
            blocked.edges.iter_mut().for_each(|b| *b = false);
            for p in &accepted {
                if p.edges.len() > i && p.edges[..i] == *root {
                    blocked.edges[p.edges[i]] = true;
                }
            }
            for &v in &last.vertices[..i] {
                blocked.vertices[v] = true;
            }

            let Some(spur_path) = shortest_path(graph, &costs, spur, destination, Some(&blocked))
            else {
                continue;
            };
            let mut edges = root.to_vec();
            edges.extend_from_slice(&spur_path.edges);
            if !seen.insert(edges.clone()) {
                continue;
            }
            let mut vertices = last.vertices[..i].to_vec();
            vertices.extend_from_slice(&spur_path.vertices);
            // price the whole path origin-outwards so equal edge sequences
            // always carry bit-identical costs
            let cost = edges.iter().map(|&e| costs[e]).sum();
            candidates.insert(Candidate(PathResult {
                edges,
                vertices,
                cost,
            }));
        }
        match candidates.pop_first() {
            Some(Candidate(next)) => accepted.push(next),
            None => break,
        }
    }
    Ok(accepted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::router::dijkstra;

    fn diamond() -> RoadGraph {
        // two simple routes 0 -> 3 plus return edges from 3
        RoadGraph::from_records(&[
            (0, 1, "a", 1.0),
            (1, 3, "b", 1.0),
            (0, 2, "c", 1.0),
            (2, 3, "d", 2.0),
            (3, 0, "e", 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn k_one_is_dijkstra() {
        let g = diamond();
        let speeds = [1.0; 5];
        let top = yen_top_k(&g, 0, 3, 1, &speeds).unwrap();
        assert_eq!(top, vec![dijkstra(&g, 0, 3, &speeds).unwrap()]);
    }

    #[test]
    fn exhausts_simple_paths() {
        let g = diamond();
        let top = yen_top_k(&g, 0, 3, 5, &[1.0; 5]).unwrap();
        assert_eq!(top.len(), 2);
        assert_eq!(top[0].vertices, vec![0, 1, 3]);
        assert_eq!(top[1].vertices, vec![0, 2, 3]);
        assert!(top[0].cost <= top[1].cost);
    }

    #[test]
    fn classic_example() {
        // C=0 D=1 E=2 F=3 G=4 H=5
        let g = RoadGraph::from_records(&[
            (0, 1, "cd", 3.0),
            (0, 2, "ce", 2.0),
            (1, 3, "df", 4.0),
            (2, 1, "ed", 1.0),
            (2, 3, "ef", 2.0),
            (2, 4, "eg", 3.0),
            (3, 4, "fg", 2.0),
            (3, 5, "fh", 1.0),
            (4, 5, "gh", 2.0),
            (5, 0, "hc", 1.0),
        ])
        .unwrap();
        let top = yen_top_k(&g, 0, 5, 3, &[1.0; 10]).unwrap();
        let routes: Vec<_> = top.iter().map(|p| (p.vertices.clone(), p.cost)).collect();
        assert_eq!(
            routes,
            vec![
                (vec![0, 2, 3, 5], 5.0),
                (vec![0, 2, 4, 5], 7.0),
                (vec![0, 1, 3, 5], 8.0),
            ]
        );
    }

    #[test]
    fn zero_k_is_rejected() {
        assert!(yen_top_k(&diamond(), 0, 3, 0, &[1.0; 5]).is_err());
    }
}
