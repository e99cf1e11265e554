//! Reference speed predictors: window mean, k-nearest neighbours and a small
//! neural network.

use crate::datahub::WindowSample;
use crate::eopf::{MlpModel, MlpParams};
use crate::{Error, Result};

/// Mean of the state vector.
pub fn history_average(features: &[f64]) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::EmptyDataset(
            "history average of an empty window".into(),
        ));
    }
    Ok(features.iter().sum::<f64>() / features.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Uniform,
    /// Weights `1 / (distance + 1e-9)`.
    InverseDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnParams {
    pub k: usize,
    pub weighting: Weighting,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: 5,
            weighting: Weighting::Uniform,
        }
    }
}

const KNN_EPS: f64 = 1e-9;

/// Brute-force neighbour search under Euclidean distance on raw speeds.
/// Equidistant neighbours are taken in training order.
pub fn knn_predict(train: &[WindowSample], params: &KnnParams, features: &[f64]) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::EmptyDataset("KNN over an empty training set".into()));
    }
    if params.k == 0 || params.k > train.len() {
        return Err(Error::invalid(format!(
            "k must lie in 1..={}, got {}",
            train.len(),
            params.k
        )));
    }
    let mut dists = Vec::with_capacity(train.len());
    for (i, s) in train.iter().enumerate() {
        if s.features.len() != features.len() {
            return Err(Error::DimensionMismatch {
                expected: s.features.len(),
                got: features.len(),
            });
        }
        let d2: f64 = s
            .features
            .iter()
            .zip(features)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        dists.push((d2, i));
    }
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if params.k < dists.len() {
        dists.select_nth_unstable_by(params.k - 1, by_distance);
        dists.truncate(params.k);
    }
    dists.sort_by(by_distance);

    Ok(match params.weighting {
        Weighting::Uniform => {
            dists.iter().map(|&(_, i)| train[i].target).sum::<f64>() / params.k as f64
        }
        Weighting::InverseDistance => {
            let (mut num, mut den) = (0.0, 0.0);
            for &(d2, i) in &dists {
                let w = 1.0 / (d2.sqrt() + KNN_EPS);
                num += w * train[i].target;
                den += w;
            }
            num / den
        }
    })
}

pub fn mlp_train(train: &[WindowSample], params: &MlpParams) -> Result<MlpModel> {
    let rows: Vec<Vec<f64>> = train.iter().map(|s| s.features.clone()).collect();
    let targets: Vec<f64> = train.iter().map(|s| s.target).collect();
    MlpModel::train(&rows, &targets, params)
}

pub fn mlp_predict(model: &MlpModel, features: &[f64]) -> Result<f64> {
    model.predict(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(features: Vec<f64>, target: f64) -> WindowSample {
        WindowSample {
            features,
            target,
            road: 0,
            t: 0,
        }
    }

    #[test]
    fn history_average_hand_values() {
        assert_eq!(history_average(&[10.0, 10.0, 10.0]).unwrap(), 10.0);
        assert_eq!(history_average(&[0.0, 10.0]).unwrap(), 5.0);
        assert!(history_average(&[]).is_err());
    }

    #[test]
    fn knn_nearest_is_self() {
        let train = vec![
            sample(vec![0.0, 0.0], 1.0),
            sample(vec![5.0, 5.0], 2.0),
            sample(vec![9.0, 1.0], 3.0),
        ];
        for w in [Weighting::Uniform, Weighting::InverseDistance] {
            let p = KnnParams { k: 1, weighting: w };
            assert_eq!(knn_predict(&train, &p, &[5.0, 5.0]).unwrap(), 2.0);
        }
        let all = KnnParams {
            k: 3,
            weighting: Weighting::Uniform,
        };
        assert_eq!(knn_predict(&train, &all, &[100.0, -3.0]).unwrap(), 2.0);
    }

    #[test]
    fn weighted_knn_three_point_oracle() {
        let train = vec![
            sample(vec![0.0], 10.0),
            sample(vec![3.0], 40.0),
            sample(vec![10.0], 99.0),
        ];
        let p = KnnParams {
            k: 2,
            weighting: Weighting::InverseDistance,
        };
        // query 1: neighbours at distance 1 and 2
        let (w1, w2) = (1.0 / (1.0 + 1e-9), 1.0 / (2.0 + 1e-9));
        let expected = (w1 * 10.0 + w2 * 40.0) / (w1 + w2);
        assert!((knn_predict(&train, &p, &[1.0]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn knn_errors() {
        let train = vec![sample(vec![0.0], 1.0)];
        assert!(knn_predict(&[], &KnnParams::default(), &[0.0]).is_err());
        let p = KnnParams {
            k: 2,
            weighting: Weighting::Uniform,
        };
        assert!(knn_predict(&train, &p, &[0.0]).is_err());
        let p = KnnParams { k: 1, ..p };
        assert!(knn_predict(&train, &p, &[0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn history_average_is_permutation_invariant(mut x in prop::collection::vec(0.0f64..100.0, 1..30)) {
            let a = history_average(&x).unwrap();
            x.reverse();
            let mid = x.len() / 2;
            x.rotate_left(mid);
            prop_assert!((history_average(&x).unwrap() - a).abs() < 1e-9);
        }

        #[test]
        fn knn_all_neighbours_is_global_mean(
            pts in prop::collection::vec((0.0f64..50.0, 0.0f64..50.0, 0.0f64..80.0), 1..25),
            q in (0.0f64..50.0, 0.0f64..50.0),
        ) {
            let train: Vec<_> = pts.iter().map(|&(a, b, y)| sample(vec![a, b], y)).collect();
            let p = KnnParams { k: train.len(), weighting: Weighting::Uniform };
            let mean = train.iter().map(|s| s.target).sum::<f64>() / train.len() as f64;
            prop_assert!((knn_predict(&train, &p, &[q.0, q.1]).unwrap() - mean).abs() < 1e-9);
        }

        #[test]
        fn weighted_equals_uniform_at_equal_distances(
            ys in prop::collection::vec(0.0f64..80.0, 4),
            r in 0.5f64..20.0,
        ) {
            // four points on a circle around the query
            let offsets = [(r, 0.0), (-r, 0.0), (0.0, r), (0.0, -r)];
            let train: Vec<_> = offsets.iter().zip(&ys).map(|(&(dx, dy), &y)| sample(vec![10.0 + dx, 10.0 + dy], y)).collect();
            let u = knn_predict(&train, &KnnParams { k: 4, weighting: Weighting::Uniform }, &[10.0, 10.0]).unwrap();
            let w = knn_predict(&train, &KnnParams { k: 4, weighting: Weighting::InverseDistance }, &[10.0, 10.0]).unwrap();
            prop_assert!((u - w).abs() < 1e-9);
        }
    }
}
