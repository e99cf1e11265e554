//! Gaussian speed spread and path-level congestion probability.

use crate::{Error, Result};

/// Normal speed distribution around a point forecast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedDistribution {
    pub mean: f64,
    pub sigma: f64,
}

impl SpeedDistribution {
    pub fn new(mean: f64, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::invalid(format!(
                "sigma must be nonnegative, got {sigma}"
            )));
        }
        Ok(SpeedDistribution { mean, sigma })
    }
}

/// Maximum-likelihood standard deviation (divisor `h`) of a window.
pub fn sigma_mle(window: &[f64]) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::EmptyDataset("sigma of an empty window".into()));
    }
    let h = window.len() as f64;
    let mean = window.iter().sum::<f64>() / h;
    let ss: f64 = window.iter().map(|x| (x - mean).powi(2)).sum();
    Ok((ss / h).sqrt())
}

/// Spread estimate for a state vector: the MLE over its most recent `h`
/// readings (all but the oldest). Zero for a single-reading window.
pub fn window_sigma(state: &[f64]) -> f64 {
    match state.len() {
        0 | 1 => 0.0,
        _ => sigma_mle(&state[1..]).unwrap_or(0.0),
    }
}

/// How per-edge congestion probabilities combine along a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathAggregation {
    /// Product of edge probabilities: every edge congested at once.
    #[default]
    AllEdges,
    /// `1 - prod(1 - p)`: at least one edge congested, assuming independence.
    AnyEdge,
}

pub fn path_congestion_prob(edge_probs: &[f64]) -> Result<f64> {
    path_congestion_prob_with(edge_probs, PathAggregation::AllEdges)
}

pub fn path_congestion_prob_with(edge_probs: &[f64], mode: PathAggregation) -> Result<f64> {
    if let Some(p) = edge_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    Ok(match mode {
        PathAggregation::AllEdges => edge_probs.iter().product(),
        PathAggregation::AnyEdge => 1.0 - edge_probs.iter().map(|p| 1.0 - p).product::<f64>(),
    })
}
