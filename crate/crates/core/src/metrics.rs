//! Regression and classification scores.

use crate::{Error, Result};

fn check_pair(pred: &[f64], actual: &[f64]) -> Result<()> {
    if pred.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyDataset("metric over empty vectors".into()));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_pair(pred, actual)?;
    let sse: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

pub fn mae(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_pair(pred, actual)?;
    let sae: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum();
    Ok(sae / pred.len() as f64)
}

/// `1 - ||pred - actual||_2 / ||actual||_2` over the whole vector.
pub fn acc(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_pair(pred, actual)?;
    let norm = actual.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::invalid("accuracy against a zero-norm target"));
    }
    let err = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(1.0 - err / norm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No positive predictions; precision reported as 0.
    pub precision_undefined: bool,
    /// No positive labels; recall reported as 0.
    pub recall_undefined: bool,
}

pub fn precision_recall_f1(pred: &[bool], actual: &[bool]) -> Result<ClassScores> {
    if pred.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            got: pred.len(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &a) in pred.iter().zip(actual) {
        match (p, a) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision_undefined = tp + fp == 0;
    let recall_undefined = tp + fn_ == 0;
    let precision = if precision_undefined {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if recall_undefined {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ClassScores {
        precision,
        recall,
        f1,
        precision_undefined,
        recall_undefined,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` from the strictest
    /// threshold down; starts at (0,0) and ends at (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC curve over every distinct score (plus a +inf sentinel), with tied
/// scores entering together, and its trapezoidal area.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass("ROC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (x0, y0) = *points.last().unwrap();
        let point = (fp as f64 / negatives as f64, tp as f64 / positives as f64);
        auc += (point.0 - x0) * (point.1 + y0) / 2.0;
        points.push(point);
    }
    Ok(RocCurve { points, auc })
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::invalid("correlation needs at least 2 points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("correlation with a constant series"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn regression_hand_values() {
        let actual = [3.0, 4.0];
        assert_eq!(rmse(&actual, &actual).unwrap(), 0.0);
        assert_eq!(mae(&actual, &actual).unwrap(), 0.0);
        assert_eq!(acc(&actual, &actual).unwrap(), 1.0);
        assert!((rmse(&[0.0, 0.0], &actual).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(mae(&[0.0, 0.0], &actual).unwrap(), 3.5);
        assert_eq!(acc(&[0.0, 0.0], &actual).unwrap(), 0.0);
    }

    #[test]
    fn regression_errors() {
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mae(&[], &[]).is_err());
        assert!(acc(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn classification_hand_values() {
        let labels = [true, false, true, false];
        let s = precision_recall_f1(&labels, &labels).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));

        // TP=2 FP=1 FN=3
        let pred = [true, true, true, false, false, false];
        let actual = [true, true, false, true, true, true];
        let s = precision_recall_f1(&pred, &actual).unwrap();
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 0.4).abs() < 1e-12);
        assert!((s.f1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn undefined_precision_is_flagged() {
        let s = precision_recall_f1(&[false, false], &[true, false]).unwrap();
        assert!(s.precision_undefined && !s.recall_undefined);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn roc_extremes() {
        let labels = [false, false, true, true];
        let perfect = roc_auc(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap();
        assert_eq!(perfect.auc, 1.0);
        let flat = roc_auc(&[0.5; 4], &labels).unwrap();
        assert_eq!(flat.auc, 0.5);
        assert_eq!(flat.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn pearson_hand_values() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let up: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let down: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &up).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &down).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
            let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let (r, m) = (rmse(&p, &a).unwrap(), mae(&p, &a).unwrap());
            prop_assert!(m >= 0.0);
            prop_assert!(r >= m - 1e-9 * (1.0 + m));
        }

        #[test]
        fn acc_is_scale_consistent(
            pairs in prop::collection::vec((1.0f64..100.0, 1.0f64..100.0), 1..50),
            c in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0],
        ) {
            let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ps: Vec<f64> = p.iter().map(|v| v * c).collect();
            let as_: Vec<f64> = a.iter().map(|v| v * c).collect();
            prop_assert!((acc(&p, &a).unwrap() - acc(&ps, &as_).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn roc_points_are_monotone(
            items in prop::collection::vec((0u8..5, any::<bool>()), 2..60)
        ) {
            let scores: Vec<f64> = items.iter().map(|i| f64::from(i.0)).collect();
            let labels: Vec<bool> = items.iter().map(|i| i.1).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let roc = roc_auc(&scores, &labels).unwrap();
            prop_assert_eq!(roc.points[0], (0.0, 0.0));
            prop_assert_eq!(*roc.points.last().unwrap(), (1.0, 1.0));
            for w in roc.points.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
            prop_assert!((0.0..=1.0).contains(&roc.auc));
        }

        #[test]
        fn pearson_affine_invariant(
            pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
            a in 0.1f64..10.0, b in -50.0f64..50.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let base = match pearson(&x, &y) { Ok(r) => r, Err(_) => return Ok(()) };
            let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            prop_assert!((pearson(&xt, &y).unwrap() - base).abs() < 1e-9);
        }
    }
}
