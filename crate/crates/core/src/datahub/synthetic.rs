//! Seeded synthetic speed corpora with a matching road graph.

use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{SpeedField, DEFAULT_STEP_MINUTES};
use crate::router::{Edge, RoadGraph};
use crate::{Error, Result};

const MIN_SPEED: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Gentle daily variation and low persistent noise.
    Smooth,
    /// Morning and evening dips repeating every day.
    RushHour,
    /// Heavy high-frequency noise plus random incidents.
    Volatile,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(Profile::Smooth),
            "rush-hour" => Ok(Profile::RushHour),
            "volatile" => Ok(Profile::Volatile),
            other => Err(Error::invalid(format!(
                "unknown profile {other:?} (expected smooth, rush-hour or volatile)"
            ))),
        }
    }
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Smooth => "smooth",
            Profile::RushHour => "rush-hour",
            Profile::Volatile => "volatile",
        }
    }
}

struct Noise {
    phi: f64,
    ar: Normal<f64>,
    white: Normal<f64>,
}

impl Noise {
    fn new(phi: f64, ar_sd: f64, white_sd: f64) -> Self {
        Noise {
            phi,
            ar: Normal::new(0.0, ar_sd).unwrap(),
            white: Normal::new(0.0, white_sd).unwrap(),
        }
    }
}

/// Generates `n_roads` speed series of `n_steps` five-minute steps and a
/// strongly connected geometric road graph with one two-way road per series.
pub fn gen_synthetic(
    n_roads: usize,
    n_steps: usize,
    seed: u64,
    profile: Profile,
) -> Result<(SpeedField, RoadGraph)> {
    if n_roads < 2 || n_steps < 64 {
        return Err(Error::invalid(format!(
            "synthetic corpus needs n_roads >= 2 and n_steps >= 64, got {n_roads} x {n_steps}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps_per_day = (24 * 60 / DEFAULT_STEP_MINUTES) as f64;
    let speeds = (0..n_roads)
        .map(|_| road_series(&mut rng, n_steps, steps_per_day, profile))
        .collect();
    let road_ids: Vec<String> = (0..n_roads).map(|i| format!("r{i}")).collect();
    let field = SpeedField::new(road_ids.clone(), speeds, DEFAULT_STEP_MINUTES)?;
    let graph = road_graph(&mut rng, road_ids)?;
    Ok((field, graph))
}

fn road_series(rng: &mut ChaCha8Rng, n: usize, day: f64, profile: Profile) -> Vec<f64> {
    let base = rng.random_range(45.0..68.0);
    let (noise, incident_rate) = match profile {
        Profile::Smooth => (Noise::new(0.98, 0.15, 0.1), 0.0),
        Profile::RushHour => (Noise::new(0.95, 0.6, 0.4), 0.0),
        Profile::Volatile => (Noise::new(0.6, 4.0, 3.0), 0.01),
    };
    // (centre step of day, width in steps, fractional depth)
    let dips: Vec<(f64, f64, f64)> = match profile {
        Profile::Smooth => vec![(day / 2.0, day / 6.0, rng.random_range(0.04..0.08))],
        Profile::RushHour => {
            let shift = rng.random_range(-6.0..6.0);
            vec![
                (
                    96.0 / 288.0 * day + shift,
                    12.0,
                    rng.random_range(0.3..0.55),
                ),
                (
                    210.0 / 288.0 * day + shift,
                    18.0,
                    rng.random_range(0.35..0.6),
                ),
            ]
        }
        Profile::Volatile => vec![(day / 2.0, day / 6.0, rng.random_range(0.05..0.1))],
    };

    let mut ar = 0.0;
    let mut incident_left = 0usize;
    let mut incident_depth = 0.0;
    (0..n)
        .map(|t| {
            let tod = t as f64 % day;
            let dip: f64 = dips
                .iter()
                .map(|&(centre, width, depth)| {
                    let raw = (tod - centre).abs();
                    let dist = raw.min(day - raw);
                    depth * (-(dist * dist) / (2.0 * width * width)).exp()
                })
                .sum();
            ar = noise.phi * ar + noise.ar.sample(rng);
            if incident_left == 0 && incident_rate > 0.0 && rng.random_bool(incident_rate) {
                incident_left = rng.random_range(3..=24);
                incident_depth = rng.random_range(0.3..0.7);
            }
            let incident = if incident_left > 0 {
                incident_left -= 1;
                incident_depth
            } else {
                0.0
            };
            let v = base * (1.0 - dip) * (1.0 - incident) + ar + noise.white.sample(rng);
            (v.max(MIN_SPEED) * 100.0).round() / 100.0
        })
        .collect()
}

/// Random points in a square joined by a nearest-neighbour spanning tree plus
/// short chords; every road is listed in both directions.
fn road_graph(rng: &mut ChaCha8Rng, road_ids: Vec<String>) -> Result<RoadGraph> {
    let n_roads = road_ids.len();
    let n_vertices = ((0.6 * n_roads as f64).ceil() as usize + 1).max(3);
    let side = 1.5 * (n_vertices as f64).sqrt();
    let points: Vec<(f64, f64)> = (0..n_vertices)
        .map(|_| (rng.random_range(0.0..side), rng.random_range(0.0..side)))
        .collect();
    let dist = |a: usize, b: usize| {
        let (dx, dy) = (points[a].0 - points[b].0, points[a].1 - points[b].1);
        (dx * dx + dy * dy).sqrt()
    };

    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(n_roads);
    for v in 1..n_vertices {
        let nearest = (0..v)
            .min_by(|&a, &b| dist(a, v).total_cmp(&dist(b, v)))
            .unwrap();
        pairs.push((nearest, v));
    }
    let chords = n_roads - pairs.len();
    if chords > 0 {
        let mut free: Vec<(usize, usize)> = (0..n_vertices)
            .flat_map(|a| (a + 1..n_vertices).map(move |b| (a, b)))
            .filter(|&(a, b)| !pairs.contains(&(a, b)) && !pairs.contains(&(b, a)))
            .collect();
        free.sort_by(|&(a, b), &(c, d)| dist(a, b).total_cmp(&dist(c, d)));
        free.truncate((3 * chords).min(free.len()));
        let mut picked = index::sample(rng, free.len(), chords).into_vec();
        picked.sort_unstable();
        pairs.extend(picked.into_iter().map(|i| free[i]));
    }

    let mut edges = Vec::with_capacity(2 * n_roads);
    for (road, &(a, b)) in pairs.iter().enumerate() {
        let length = (dist(a, b).max(0.2) * 1000.0).round() / 1000.0;
        edges.push(Edge {
            from: a,
            to: b,
            road,
            length,
        });
        edges.push(Edge {
            from: b,
            to: a,
            road,
            length,
        });
    }
    RoadGraph::new((0..n_vertices as u32).collect(), road_ids, edges)
}

/// Sample autocorrelation at `lag`.
#[cfg(test)]
fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let cov: f64 = (0..n - lag)
        .map(|t| (x[t] - mean) * (x[t + lag] - mean))
        .sum();
    cov / var
}
