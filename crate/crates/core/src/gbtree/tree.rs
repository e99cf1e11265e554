//! CART regression trees grown on second-order gradient statistics.
//!
//! Splits are found by exact greedy search, level by level: every feature is
//! scanned once per level in presorted order, accumulating left-hand sums for
//! every open node at the same time. A threshold is the midpoint between two
//! consecutive distinct values; samples with `x < threshold` go left.

use super::BoostParams;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

/// A binary tree stored in pre-order; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub(crate) fn from_preorder(nodes: Vec<Node>) -> Self {
        RegressionTree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Index into [`nodes`](Self::nodes) of the leaf `x` falls in.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { weight } => weight,
            Node::Split { .. } => unreachable!(),
        }
    }
}

/// Feature rows with per-feature sample orderings computed once per fit.
pub(crate) struct Presorted<'a> {
    rows: &'a [Vec<f64>],
    order: Vec<Vec<u32>>,
}

impl<'a> Presorted<'a> {
    pub(crate) fn new(rows: &'a [Vec<f64>], n_features: usize) -> Self {
        let order = (0..n_features)
            .map(|f| {
                let mut idx: Vec<u32> = (0..rows.len() as u32).collect();
                idx.sort_by(|&a, &b| rows[a as usize][f].total_cmp(&rows[b as usize][f]));
                idx
            })
            .collect();
        Presorted { rows, order }
    }
}

/// Leaf weight minimising the second-order objective.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom > 0.0 {
        -g / denom
    } else {
        0.0
    }
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom > 0.0 {
        g * g / denom
    } else {
        0.0
    }
}

/// `0.5 * [GL²/(HL+λ) + GR²/(HR+λ) - G²/(H+λ)] - γ`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - score(gl + gr, hl + hr, lambda)) - gamma
}

#[derive(Debug, Clone, Copy)]
struct Stats {
    g: f64,
    h: f64,
    n: usize,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

enum Building {
    Open,
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
}

struct BuildNode {
    stats: Stats,
    depth: usize,
    state: Building,
}

struct Scan {
    g: f64,
    h: f64,
    n: usize,
    last: f64,
    best: Option<Candidate>,
}

pub(crate) fn build_tree(
    data: &Presorted<'_>,
    grad: &[f64],
    hess: &[f64],
    params: &BoostParams,
) -> RegressionTree {
    let n = grad.len();
    let mut pos = vec![0usize; n];
    let mut nodes = vec![BuildNode {
        stats: node_sums(&pos, grad, hess, 1)[0],
        depth: 0,
        state: Building::Open,
    }];
    let mut frontier = vec![0usize];
    const CLOSED: usize = usize::MAX;

    while !frontier.is_empty() {
        let mut slot_of = vec![CLOSED; nodes.len()];
        let mut open = Vec::new();
        for &node in &frontier {
            let nd = &nodes[node];
            if nd.depth < params.max_depth && nd.stats.n >= 2 * params.min_samples_leaf {
                slot_of[node] = open.len();
                open.push(node);
            }
        }
        if open.is_empty() {
            break;
        }

        let mut scans: Vec<Scan> = open
            .iter()
            .map(|_| Scan {
                g: 0.0,
                h: 0.0,
                n: 0,
                last: f64::NAN,
                best: None,
            })
            .collect();
        for (feature, order) in data.order.iter().enumerate() {
            for s in scans.iter_mut() {
                s.g = 0.0;
                s.h = 0.0;
                s.n = 0;
            }
            for &i in order {
                let i = i as usize;
                let slot = slot_of[pos[i]];
                if slot == CLOSED {
                    continue;
                }
                let total = nodes[open[slot]].stats;
                let s = &mut scans[slot];
                let v = data.rows[i][feature];
                if s.n >= params.min_samples_leaf
                    && total.n - s.n >= params.min_samples_leaf
                    && v > s.last
                {
                    let gain = split_gain(
                        s.g,
                        s.h,
                        total.g - s.g,
                        total.h - s.h,
                        params.lambda,
                        params.gamma,
                    );
                    if s.best.is_none_or(|b| gain > b.gain) {
                        let mid = 0.5 * (s.last + v);
                        let threshold = if mid > s.last { mid } else { v };
                        s.best = Some(Candidate {
                            feature,
                            threshold,
                            gain,
                        });
                    }
                }
                s.g += grad[i];
                s.h += hess[i];
                s.n += 1;
                s.last = v;
            }
        }

        let mut next = Vec::new();
        for (slot, &node) in open.iter().enumerate() {
            let Some(best) = scans[slot].best.filter(|b| b.gain > 0.0) else {
                continue;
            };
            let depth = nodes[node].depth + 1;
            let left = nodes.len();
            let right = left + 1;
            for (i, p) in pos.iter_mut().enumerate() {
                if *p == node {
                    *p = if data.rows[i][best.feature] < best.threshold {
                        left
                    } else {
                        right
                    };
                }
            }
            nodes[node].state = Building::Split {
                feature: best.feature,
                threshold: best.threshold,
                gain: best.gain,
                left,
                right,
            };
            for _ in 0..2 {
                nodes.push(BuildNode {
                    stats: Stats {
                        g: 0.0,
                        h: 0.0,
                        n: 0,
                    },
                    depth,
                    state: Building::Open,
                });
            }
            next.push(left);
            next.push(right);
        }
        if next.is_empty() {
            break;
        }
        let sums = node_sums(&pos, grad, hess, nodes.len());
        for &node in &next {
            nodes[node].stats = sums[node];
        }
        frontier = next;
    }

    let mut out = Vec::with_capacity(nodes.len());
    emit_preorder(&nodes, 0, params.lambda, &mut out);
    RegressionTree::from_preorder(out)
}

/// Per-node gradient sums, accumulated in sample order.
fn node_sums(pos: &[usize], grad: &[f64], hess: &[f64], n_nodes: usize) -> Vec<Stats> {
    let mut sums = vec![
        Stats {
            g: 0.0,
            h: 0.0,
            n: 0
        };
        n_nodes
    ];
    for (i, &p) in pos.iter().enumerate() {
        sums[p].g += grad[i];
        sums[p].h += hess[i];
        sums[p].n += 1;
    }
    sums
}

fn emit_preorder(nodes: &[BuildNode], i: usize, lambda: f64, out: &mut Vec<Node>) -> usize {
    let at = out.len();
    match nodes[i].state {
        Building::Open => {
            let s = nodes[i].stats;
            out.push(Node::Leaf {
                weight: leaf_weight(s.g, s.h, lambda),
            });
        }
        Building::Split {
            feature,
            threshold,
            gain,
            left,
            right,
        } => {
            out.push(Node::Leaf { weight: 0.0 });
            let l = emit_preorder(nodes, left, lambda, out);
            let r = emit_preorder(nodes, right, lambda, out);
            out[at] = Node::Split {
                feature,
                threshold,
                gain,
                left: l,
                right: r,
            };
        }
    }
    at
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_formula() {
        // G_L = 5, G_R = -5, H = 1 each, lambda = 0: 0.5 * (25 + 25 - 0)
        assert_eq!(split_gain(5.0, 1.0, -5.0, 1.0, 0.0, 0.0), 25.0);
        assert_eq!(split_gain(5.0, 1.0, -5.0, 1.0, 0.0, 30.0), -5.0);
        assert_eq!(leaf_weight(5.0, 1.0, 0.0), -5.0);
        assert_eq!(leaf_weight(3.0, 2.0, 1.0), -1.0);
    }

    #[test]
    fn preorder_layout() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let grad: Vec<f64> = (0..8).map(|i| if i < 4 { 1.0 } else { -1.0 }).collect();
        let hess = vec![1.0; 8];
        let data = Presorted::new(&rows, 1);
        let params = BoostParams {
            max_depth: 1,
            lambda: 0.0,
            ..BoostParams::default()
        };
        let tree = build_tree(&data, &grad, &hess, &params);
        assert_eq!(
            tree.nodes(),
            &[
                Node::Split {
                    feature: 0,
                    threshold: 3.5,
                    gain: 4.0,
                    left: 1,
                    right: 2
                },
                Node::Leaf { weight: -1.0 },
                Node::Leaf { weight: 1.0 },
            ]
        );
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.n_leaves(), 2);
    }

    #[test]
    fn equal_gains_prefer_lowest_feature_then_threshold() {
        // both features separate the classes identically
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let data = Presorted::new(&rows, 2);
        let params = BoostParams {
            max_depth: 1,
            ..BoostParams::default()
        };
        let tree = build_tree(&data, &[1.0, -1.0], &[1.0, 1.0], &params);
        assert!(matches!(tree.nodes()[0], Node::Split { feature: 0, .. }));

        // symmetric gradients: thresholds 0.5 and 2.5 tie, the lower wins
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let data = Presorted::new(&rows, 1);
        let tree = build_tree(&data, &[1.0, -1.0, -1.0, 1.0], &[1.0; 4], &params);
        assert!(matches!(tree.nodes()[0], Node::Split { threshold, .. } if threshold == 0.5));
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let data = Presorted::new(&rows, 1);
        let params = BoostParams {
            max_depth: 1,
            min_samples_leaf: 3,
            ..BoostParams::default()
        };
        // the best unconstrained split would isolate the first sample
        let tree = build_tree(&data, &[10.0, 0.0, 0.0, 0.0, 0.0, 0.0], &[1.0; 6], &params);
        assert!(matches!(tree.nodes()[0], Node::Split { threshold, .. } if threshold == 2.5));
    }
}
