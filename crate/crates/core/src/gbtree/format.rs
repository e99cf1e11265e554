//! Line-oriented text form of a boosted ensemble.
//!
//! ```text
//! roadcast-gbt 1
//! objective squared_error
//! n_features 12
//! base_score 54.3
//! params 50 4 1 0 0.3 1
//! trees 50
//! tree 7
//! S 11 52.125 310.5
//! L -1.25
//! ...
//! end
//! ```
//!
//! `params` lists rounds, max_depth, lambda, gamma, eta and min_samples_leaf.
//! Nodes are written in pre-order: `S feature threshold gain` for a split,
//! `L weight` for a leaf. Floats use the shortest representation that parses
//! back to the same value.

use std::fmt::Write;

use super::{BoostParams, BoostedEnsemble, Node, Objective, RegressionTree};
use crate::{Error, Result};

const HEADER: &str = "roadcast-gbt 1";

pub(super) fn write(m: &BoostedEnsemble) -> String {
    let mut s = String::new();
    let p = &m.params;
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(s, "objective {}", m.objective.name());
    let _ = writeln!(s, "n_features {}", m.n_features);
    let _ = writeln!(s, "base_score {}", m.base_score);
    let _ = writeln!(
        s,
        "params {} {} {} {} {} {}",
        p.rounds, p.max_depth, p.lambda, p.gamma, p.eta, p.min_samples_leaf
    );
    let _ = writeln!(s, "trees {}", m.trees.len());
    for tree in &m.trees {
        let _ = writeln!(s, "tree {}", tree.nodes().len());
        for node in tree.nodes() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    gain,
                    ..
                } => {
                    let _ = writeln!(s, "S {feature} {threshold} {gain}");
                }
                Node::Leaf { weight } => {
                    let _ = writeln!(s, "L {weight}");
                }
            }
        }
    }
    s.push_str("end\n");
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::ModelFormat {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Result<Vec<&'a str>> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.split_whitespace().collect())
            }
            None => Err(self.err("unexpected end of input")),
        }
    }

    /// Next line, which must be `key` followed by exactly `n` values.
    fn keyed(&mut self, key: &str, n: usize) -> Result<Vec<&'a str>> {
        let parts = self.next()?;
        if parts.first() != Some(&key) || parts.len() != n + 1 {
            return Err(self.err(format!("expected `{key}` with {n} value(s)")));
        }
        Ok(parts[1..].to_vec())
    }

    /// Next line, which must be `key` and a single value.
    fn value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.keyed(key, 1)?[0];
        self.parse(v)
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("bad value {s:?}")))
    }
}

pub(super) fn read(text: &str) -> Result<BoostedEnsemble> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let header = lines.next()?;
    if header.join(" ") != HEADER {
        return Err(lines.err(format!("expected header {HEADER:?}")));
    }
    let objective = match lines.keyed("objective", 1)?[0] {
        "squared_error" => Objective::SquaredError,
        "logistic" => Objective::Logistic,
        other => return Err(lines.err(format!("unknown objective {other:?}"))),
    };
    let n_features: usize = lines.value("n_features")?;
    let base_score: f64 = lines.value("base_score")?;
    let p = lines.keyed("params", 6)?;
    let params = BoostParams {
        rounds: lines.parse(p[0])?,
        max_depth: lines.parse(p[1])?,
        lambda: lines.parse(p[2])?,
        gamma: lines.parse(p[3])?,
        eta: lines.parse(p[4])?,
        min_samples_leaf: lines.parse(p[5])?,
    };
    params.validate().map_err(|e| lines.err(e.to_string()))?;
    let n_trees: usize = lines.value("trees")?;

    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let n_nodes: usize = lines.value("tree")?;
        if n_nodes == 0 {
            return Err(lines.err("tree with no nodes"));
        }
        let mut raw = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let parts = lines.next()?;
            let node = match parts.as_slice() {
                ["S", f, t, g] => {
                    let feature: usize = lines.parse(f)?;
                    if feature >= n_features {
                        return Err(lines.err(format!("feature {feature} out of range")));
                    }
                    Node::Split {
                        feature,
                        threshold: lines.parse(t)?,
                        gain: lines.parse(g)?,
                        left: 0,
                        right: 0,
                    }
                }
                ["L", w] => Node::Leaf {
                    weight: lines.parse(w)?,
                },
                _ => return Err(lines.err("expected `S feature threshold gain` or `L weight`")),
            };
            raw.push(node);
        }
        let end = link(&mut raw, 0).ok_or_else(|| lines.err("truncated tree"))?;
        if end != raw.len() {
            return Err(lines.err("tree has trailing nodes"));
        }
        trees.push(RegressionTree::from_preorder(raw));
    }
    if lines.next()? != ["end"] {
        return Err(lines.err("expected `end`"));
    }
    Ok(BoostedEnsemble {
        base_score,
        trees,
        params,
        objective,
        n_features,
    })
}

/// Fills child indices of the subtree rooted at `i`; returns the index just
/// past it, or `None` if the node list runs out.
fn link(nodes: &mut [Node], i: usize) -> Option<usize> {
    match nodes.get(i)? {
        Node::Leaf { .. } => Some(i + 1),
        Node::Split { .. } => {
            let left = i + 1;
            let right = link(nodes, left)?;
            let end = link(nodes, right)?;
            if let Node::Split {
                left: l, right: r, ..
            } = &mut nodes[i]
            {
                *l = left;
                *r = right;
            }
            Some(end)
        }
    }
}
