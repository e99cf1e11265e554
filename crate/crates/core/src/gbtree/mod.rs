//! Gradient boosted regression trees.
//!
//! Each round fits one tree to the first and second derivatives of the loss at
//! the current predictions. A leaf gets weight `-G/(H+λ)` and a split is kept
//! only when its gain
//! `0.5 * [GL²/(HL+λ) + GR²/(HR+λ) - G²/(H+λ)] - γ` is positive.

mod format;
mod tree;

use std::path::Path;

pub use tree::{leaf_weight, split_gain, Node, RegressionTree};

use crate::datahub::WindowSample;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    /// Shrinkage applied to every tree output.
    pub eta: f64,
    pub min_samples_leaf: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            rounds: 50,
            max_depth: 4,
            lambda: 1.0,
            gamma: 0.0,
            eta: 0.3,
            min_samples_leaf: 1,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::invalid("max_depth must be positive"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be positive"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid(format!(
                "eta must lie in (0, 1], got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    SquaredError,
    Logistic,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::SquaredError => "squared_error",
            Objective::Logistic => "logistic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostedEnsemble {
    pub base_score: f64,
    pub trees: Vec<RegressionTree>,
    pub params: BoostParams,
    pub objective: Objective,
    pub n_features: usize,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Smallest distance kept between a probability and 0 or 1.
const PROBA_EPS: f64 = 1e-12;

pub fn train_regressor(train: &[WindowSample], params: &BoostParams) -> Result<BoostedEnsemble> {
    let (rows, targets) = unzip(train);
    BoostedEnsemble::fit(&rows, &targets, params, Objective::SquaredError)
}

/// Targets must be 0 or 1.
pub fn train_classifier(train: &[WindowSample], params: &BoostParams) -> Result<BoostedEnsemble> {
    let (rows, targets) = unzip(train);
    BoostedEnsemble::fit(&rows, &targets, params, Objective::Logistic)
}

fn unzip(samples: &[WindowSample]) -> (Vec<Vec<f64>>, Vec<f64>) {
    samples
        .iter()
        .map(|s| (s.features.clone(), s.target))
        .unzip()
}

impl BoostedEnsemble {
    pub fn fit(
        rows: &[Vec<f64>],
        targets: &[f64],
        params: &BoostParams,
        objective: Objective,
    ) -> Result<Self> {
        params.validate()?;
        if rows.is_empty() {
            return Err(Error::EmptyDataset("no training samples".into()));
        }
        if rows.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: targets.len(),
            });
        }
        let n_features = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n_features) {
            return Err(Error::DimensionMismatch {
                expected: n_features,
                got: bad.len(),
            });
        }
        if rows.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
            return Err(Error::invalid("training data contains non-finite values"));
        }
        let n = targets.len() as f64;
        let base_score = match objective {
            Objective::SquaredError => targets.iter().sum::<f64>() / n,
            Objective::Logistic => {
                if targets.iter().any(|&y| y != 0.0 && y != 1.0) {
                    return Err(Error::invalid("classification targets must be 0 or 1"));
                }
                let pos = targets.iter().filter(|&&y| y == 1.0).count();
                if pos == 0 || pos == targets.len() {
                    return Err(Error::SingleClass("training labels".into()));
                }
                let rate = pos as f64 / n;
                (rate / (1.0 - rate)).ln()
            }
        };

        let data = tree::Presorted::new(rows, n_features);
        let mut raw = vec![base_score; rows.len()];
        let mut grad = vec![0.0; rows.len()];
        let mut hess = vec![0.0; rows.len()];
        let mut trees = Vec::with_capacity(params.rounds);
        for _ in 0..params.rounds {
            for i in 0..rows.len() {
                match objective {
                    Objective::SquaredError => {
                        grad[i] = raw[i] - targets[i];
                        hess[i] = 1.0;
                    }
                    Objective::Logistic => {
                        let p = sigmoid(raw[i]);
                        grad[i] = p - targets[i];
                        hess[i] = p * (1.0 - p);
                    }
                }
            }
            let tree = tree::build_tree(&data, &grad, &hess, params);
            for (r, row) in raw.iter_mut().zip(rows) {
                *r += params.eta * tree.predict(row);
            }
            trees.push(tree);
        }
        Ok(BoostedEnsemble {
            base_score,
            trees,
            params: *params,
            objective,
            n_features,
        })
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Speed estimate for regressors, raw log-odds for classifiers.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let mut raw = self.base_score;
        for tree in &self.trees {
            raw += self.params.eta * tree.predict(x);
        }
        Ok(raw)
    }

    /// Logistic probability of the raw score, kept strictly inside (0, 1).
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.predict(x)?).clamp(PROBA_EPS, 1.0 - PROBA_EPS))
    }

    /// Raw score after 0, 1, ..., `trees.len()` trees.
    pub fn staged_predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut raw = self.base_score;
        let mut out = Vec::with_capacity(self.trees.len() + 1);
        out.push(raw);
        for tree in &self.trees {
            raw += self.params.eta * tree.predict(x);
            out.push(raw);
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        format::write(self)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        format::read(text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn zero_rounds_predict_the_mean() {
        let params = BoostParams {
            rounds: 0,
            ..BoostParams::default()
        };
        let m = BoostedEnsemble::fit(
            &rows(&[1.0, 2.0, 3.0]),
            &[2.0, 4.0, 9.0],
            &params,
            Objective::SquaredError,
        )
        .unwrap();
        assert_eq!(m.predict(&[100.0]).unwrap(), 5.0);
        assert!(m.trees.is_empty());
    }

    #[test]
    fn two_point_hand_example() {
        let params = BoostParams {
            rounds: 1,
            max_depth: 1,
            lambda: 0.0,
            gamma: 0.0,
            eta: 1.0,
            min_samples_leaf: 1,
        };
        let m = BoostedEnsemble::fit(
            &rows(&[0.0, 1.0]),
            &[0.0, 10.0],
            &params,
            Objective::SquaredError,
        )
        .unwrap();
        assert_eq!(m.base_score, 5.0);
        assert_eq!(
            m.trees[0].nodes(),
            &[
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    gain: 25.0,
                    left: 1,
                    right: 2
                },
                Node::Leaf { weight: -5.0 },
                Node::Leaf { weight: 5.0 },
            ]
        );
        assert_eq!(m.predict(&[0.0]).unwrap(), 0.0);
        assert_eq!(m.predict(&[1.0]).unwrap(), 10.0);
    }

    #[test]
    fn rejects_bad_input() {
        let p = BoostParams::default();
        assert!(BoostedEnsemble::fit(&[], &[], &p, Objective::SquaredError).is_err());
        assert!(BoostedEnsemble::fit(
            &[vec![1.0], vec![1.0, 2.0]],
            &[1.0, 2.0],
            &p,
            Objective::SquaredError
        )
        .is_err());
        assert!(matches!(
            BoostedEnsemble::fit(&rows(&[1.0, 2.0]), &[1.0, 1.0], &p, Objective::Logistic),
            Err(Error::SingleClass(_))
        ));
        assert!(
            BoostedEnsemble::fit(&rows(&[1.0, 2.0]), &[0.0, 2.0], &p, Objective::Logistic).is_err()
        );
        let bad = BoostParams { eta: 0.0, ..p };
        assert!(
            BoostedEnsemble::fit(&rows(&[1.0]), &[1.0], &bad, Objective::SquaredError).is_err()
        );
        let m = BoostedEnsemble::fit(&rows(&[1.0, 2.0]), &[1.0, 3.0], &p, Objective::SquaredError)
            .unwrap();
        assert!(m.predict(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn separable_logloss_decreases_every_round() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| if x < 10.0 { 0.0 } else { 1.0 })
            .collect();
        let params = BoostParams {
            rounds: 30,
            ..BoostParams::default()
        };
        let m = BoostedEnsemble::fit(&rows(&xs), &ys, &params, Objective::Logistic).unwrap();
        let staged: Vec<Vec<f64>> = xs
            .iter()
            .map(|&x| m.staged_predict(&[x]).unwrap())
            .collect();
        let logloss = |round: usize| -> f64 {
            staged
                .iter()
                .zip(&ys)
                .map(|(s, &y)| {
                    let p = sigmoid(s[round]);
                    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
                })
                .sum::<f64>()
        };
        for r in 0..params.rounds {
            assert!(logloss(r + 1) < logloss(r), "round {r}");
        }
        for &x in &xs {
            let p = m.predict_proba(&[x]).unwrap();
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn huge_gamma_leaves_stumps_only() {
        let params = BoostParams {
            gamma: 1e9,
            rounds: 5,
            ..BoostParams::default()
        };
        let xs: Vec<f64> = (0..30).map(f64::from).collect();
        let m = BoostedEnsemble::fit(&rows(&xs), &xs, &params, Objective::SquaredError).unwrap();
        assert!(m.trees.iter().all(|t| t.n_leaves() == 1));
    }
}
