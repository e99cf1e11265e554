//! Re-ranking of Top-K candidate paths with a learned speed corrector.
//!
//! The corrector maps one edge's forecast `(ŝ, p̂, σ̂)` together with the
//! edge count `n` of the candidate path it sits on to a corrected speed. A
//! candidate's corrected cost is the sum of its edge lengths over corrected
//! speeds, and the cheapest candidate wins.

pub mod mlp;

use std::collections::HashMap;

pub use mlp::{Gradients, MlpModel, MlpParams};

use crate::router::{PathResult, RoadGraph};
use crate::{Error, Result};

/// Forecast for the road under one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFeatures {
    pub s_hat: f64,
    pub p_hat: f64,
    pub sigma_hat: f64,
}

/// One training example: an edge occurrence on a served candidate path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EopfRecord {
    pub s_hat: f64,
    pub p_hat: f64,
    pub sigma_hat: f64,
    pub n: usize,
    pub target: f64,
}

impl EopfRecord {
    pub fn features(&self) -> [f64; 4] {
        feature_vector(
            &EdgeFeatures {
                s_hat: self.s_hat,
                p_hat: self.p_hat,
                sigma_hat: self.sigma_hat,
            },
            self.n,
        )
    }
}

fn feature_vector(f: &EdgeFeatures, n: usize) -> [f64; 4] {
    [f.s_hat, f.p_hat, f.sigma_hat, n as f64]
}

/// What was known about one edge of a served candidate path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeObservation {
    pub edge: usize,
    pub s_hat: Option<f64>,
    pub p_hat: Option<f64>,
    pub sigma_hat: Option<f64>,
    /// Realised speed at the forecast time.
    pub actual: Option<f64>,
}

/// The candidate paths offered for one historical request, each as its edge
/// observations in travel order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ServedRequest {
    pub candidates: Vec<Vec<EdgeObservation>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSet {
    pub records: Vec<EopfRecord>,
    /// Edge occurrences dropped for missing or out-of-range values.
    pub skipped: usize,
}

/// One record per edge occurrence on every served candidate; `n` is the edge
/// count of that candidate.
pub fn build_training_set(history: &[ServedRequest]) -> Result<TrainingSet> {
    if history.is_empty() {
        return Err(Error::EmptyDataset("no served requests".into()));
    }
    let mut set = TrainingSet::default();
    for request in history {
        for path in &request.candidates {
            let n = path.len();
            for obs in path {
                match record(obs, n) {
                    Some(r) => set.records.push(r),
                    None => set.skipped += 1,
                }
            }
        }
    }
    if set.skipped > 0 {
        log::warn!(
            "skipped {} edge occurrence(s) with missing or invalid features",
            set.skipped
        );
    }
    Ok(set)
}

fn record(obs: &EdgeObservation, n: usize) -> Option<EopfRecord> {
    let (s_hat, p_hat, sigma_hat, target) = (obs.s_hat?, obs.p_hat?, obs.sigma_hat?, obs.actual?);
    let valid = s_hat > 0.0
        && s_hat.is_finite()
        && (0.0..=1.0).contains(&p_hat)
        && sigma_hat >= 0.0
        && sigma_hat.is_finite()
        && target > 0.0
        && target.is_finite();
    valid.then_some(EopfRecord {
        s_hat,
        p_hat,
        sigma_hat,
        n,
        target,
    })
}

pub const MIN_TRAINING_RECORDS: usize = 10;

pub fn train_eopf(records: &[EopfRecord], params: &MlpParams) -> Result<MlpModel> {
    if records.len() < MIN_TRAINING_RECORDS {
        return Err(Error::EmptyDataset(format!(
            "EOPF training needs at least {MIN_TRAINING_RECORDS} records, got {}",
            records.len()
        )));
    }
    if let Some(r) = records.iter().find(|r| !(r.target > 0.0)) {
        return Err(Error::invalid(format!(
            "non-positive target speed {}",
            r.target
        )));
    }
    let rows: Vec<Vec<f64>> = records.iter().map(|r| r.features().to_vec()).collect();
    let targets: Vec<f64> = records.iter().map(|r| r.target).collect();
    MlpModel::train(&rows, &targets, params)
}

/// Maps an edge forecast and its path's edge count to a corrected speed.
pub trait SpeedCorrector {
    fn corrected_speed(&self, features: &EdgeFeatures, n: usize) -> Result<f64>;
}

impl SpeedCorrector for MlpModel {
    fn corrected_speed(&self, features: &EdgeFeatures, n: usize) -> Result<f64> {
        self.predict(&feature_vector(features, n))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reranked {
    /// Position of the winner in the input candidate list.
    pub index: usize,
    /// Corrected cost of every candidate, in input order.
    pub costs: Vec<f64>,
}

/// Re-prices every candidate with corrected speeds and picks the cheapest;
/// ties go to the earlier candidate.
pub fn rerank<C: SpeedCorrector + ?Sized>(
    graph: &RoadGraph,
    candidates: &[PathResult],
    features: &HashMap<usize, EdgeFeatures>,
    model: &C,
) -> Result<Reranked> {
    if candidates.is_empty() {
        return Err(Error::EmptyDataset("no candidate paths".into()));
    }
    let mut costs = Vec::with_capacity(candidates.len());
    for path in candidates {
        let n = path.edges.len();
        let mut cost = 0.0;
        for &e in &path.edges {
            let f = features.get(&e).ok_or(Error::MissingEdgeFeature(e))?;
            let speed = model.corrected_speed(f, n)?;
            if !(speed > 0.0) {
                return Err(Error::invalid(format!(
                    "corrected speed {speed} on edge {e} is not positive"
                )));
            }
            cost += graph.edge(e).length / speed;
        }
        costs.push(cost);
    }
    let mut index = 0;
    for (i, &c) in costs.iter().enumerate() {
        if c < costs[index] {
            index = i;
        }
    }
    Ok(Reranked { index, costs })
}
