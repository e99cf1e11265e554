//! Navigation evaluation: the optimal route on realised speeds against routes
//! chosen from current speeds (naive), forecasts (predicted) and re-ranked
//! forecast candidates (EOPF), all priced on realised speeds.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use roadcast::datahub::{SpeedField, WindowSpec};
use roadcast::eopf::{rerank, EdgeFeatures, EdgeObservation, ServedRequest, SpeedCorrector};
use roadcast::router::{dijkstra, yen_top_k, PathResult, RoadGraph};
use serde::{Deserialize, Serialize};

use crate::forecast::RoadForecast;
use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavRequest {
    pub id: usize,
    pub origin: u32,
    pub destination: u32,
    /// Window origin `t`; routes are priced at `t + d`.
    pub timestep: usize,
}

/// `n_per_interval` uniform origin-destination pairs (origin ≠ destination)
/// at each listed timestep, numbered in generation order.
pub fn gen_requests(
    graph: &RoadGraph,
    n_per_interval: usize,
    intervals: &[usize],
    seed: u64,
) -> Result<Vec<NavRequest>> {
    let n = graph.n_vertices();
    if n < 2 {
        return Err(HarnessError::Usage(format!(
            "requests need at least 2 vertices, graph has {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_per_interval * intervals.len());
    for &timestep in intervals {
        for _ in 0..n_per_interval {
            let o = rng.random_range(0..n);
            let mut d = rng.random_range(0..n - 1);
            if d >= o {
                d += 1;
            }
            out.push(NavRequest {
                id: out.len(),
                origin: graph.vertex_id(o),
                destination: graph.vertex_id(d),
                timestep,
            });
        }
    }
    Ok(out)
}

/// `count` window origins spread evenly over the test range.
pub fn evaluation_intervals(
    n_steps: usize,
    spec: WindowSpec,
    ratio: f64,
    count: usize,
) -> Result<Vec<usize>> {
    let n_windows = n_steps.saturating_sub(spec.d);
    let start = roadcast::datahub::train_len(n_windows, ratio);
    let len = n_windows.saturating_sub(start);
    if len == 0 {
        return Err(
            roadcast::Error::EmptyDataset("test range holds no window origins".into()).into(),
        );
    }
    let count = count.min(len);
    Ok((0..count).map(|i| start + i * len / count).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRecord {
    pub request: NavRequest,
    /// Travel times in hours, priced on realised speeds.
    pub t_optimal: f64,
    pub t_naive: f64,
    pub t_predict: f64,
    pub t_eopf: Option<f64>,
    pub regret_naive: f64,
    pub regret_predict: f64,
    pub regret_eopf: Option<f64>,
    /// Position of the EOPF choice in the predicted Top-K list.
    pub eopf_rank: Option<usize>,
}

/// Graph, data and routing settings shared by every request.
pub struct NavSetup<'a> {
    pub graph: &'a RoadGraph,
    pub field: &'a SpeedField,
    /// Field row of each graph road.
    pub rows: Vec<usize>,
    pub spec: WindowSpec,
    pub k: usize,
}

impl<'a> NavSetup<'a> {
    pub fn new(
        graph: &'a RoadGraph,
        field: &'a SpeedField,
        spec: WindowSpec,
        k: usize,
    ) -> Result<Self> {
        let rows = graph.align_roads(field.road_ids())?;
        Ok(NavSetup {
            graph,
            field,
            rows,
            spec,
            k,
        })
    }

    /// Per-graph-road values, or `None` if any is unusable as a speed.
    fn speeds(&self, value: impl Fn(usize) -> f64) -> Option<Vec<f64>> {
        let v: Vec<f64> = self.rows.iter().map(|&r| value(r)).collect();
        v.iter().all(|s| s.is_finite() && *s > 0.0).then_some(v)
    }

    fn endpoints(&self, req: &NavRequest) -> Result<(usize, usize)> {
        let find = |id: u32| {
            self.graph.vertex_index(id).ok_or_else(|| {
                HarnessError::Usage(format!("request {}: unknown vertex {id}", req.id))
            })
        };
        Ok((find(req.origin)?, find(req.destination)?))
    }

    /// Top-K candidates on forecast speeds, or `None` when a forecast is unusable.
    pub fn candidates(
        &self,
        req: &NavRequest,
        forecast: &[RoadForecast],
    ) -> Result<Option<Vec<PathResult>>> {
        let (o, d) = self.endpoints(req)?;
        match self.speeds(|r| forecast[r].speed) {
            Some(predicted) => Ok(Some(yen_top_k(self.graph, o, d, self.k, &predicted)?)),
            None => Ok(None),
        }
    }

    fn edge_features(
        &self,
        paths: &[PathResult],
        forecast: &[RoadForecast],
    ) -> HashMap<usize, EdgeFeatures> {
        let mut map = HashMap::new();
        for &e in paths.iter().flat_map(|p| &p.edges) {
            let f = forecast[self.rows[self.graph.edge(e).road]];
            map.insert(
                e,
                EdgeFeatures {
                    s_hat: f.speed,
                    p_hat: f.congestion_prob,
                    sigma_hat: f.sigma,
                },
            );
        }
        map
    }
}

fn lookup<'f>(
    forecasts: &'f BTreeMap<usize, Vec<RoadForecast>>,
    req: &NavRequest,
) -> Result<&'f [RoadForecast]> {
    forecasts
        .get(&req.timestep)
        .map(Vec::as_slice)
        .ok_or_else(|| HarnessError::Usage(format!("no forecast for timestep {}", req.timestep)))
}

/// What each historical request was offered, with realised speeds attached.
pub fn served_history(
    setup: &NavSetup,
    requests: &[NavRequest],
    forecasts: &BTreeMap<usize, Vec<RoadForecast>>,
) -> Result<Vec<ServedRequest>> {
    let target = setup.spec.d;
    requests
        .par_iter()
        .map(|req| {
            let forecast = lookup(forecasts, req)?;
            let Some(paths) = setup.candidates(req, forecast)? else {
                return Ok(ServedRequest::default());
            };
            let candidates = paths
                .iter()
                .map(|p| {
                    p.edges
                        .iter()
                        .map(|&e| {
                            let row = setup.rows[setup.graph.edge(e).road];
                            let f = forecast[row];
                            EdgeObservation {
                                edge: e,
                                s_hat: Some(f.speed),
                                p_hat: Some(f.congestion_prob),
                                sigma_hat: Some(f.sigma),
                                actual: Some(setup.field.speed(row, req.timestep + target)),
                            }
                        })
                        .collect()
                })
                .collect();
            Ok(ServedRequest { candidates })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NavOutcome {
    /// Evaluated requests in request-id order.
    pub records: Vec<RegretRecord>,
    pub skipped: usize,
    /// EOPF choices that were not one of the Top-K candidates.
    pub membership_violations: usize,
}

enum Evaluated {
    Done(RegretRecord, bool),
    Skipped,
}

fn regret(t: f64, t_optimal: f64) -> Result<f64> {
    let r = (t - t_optimal) / t_optimal;
    if r < -1e-12 {
        return Err(HarnessError::Usage(format!(
            "route priced below the optimum ({t} < {t_optimal})"
        )));
    }
    Ok(r.max(0.0))
}

fn evaluate_one(
    setup: &NavSetup,
    req: &NavRequest,
    forecast: &[RoadForecast],
    eopf: Option<&(dyn SpeedCorrector + Sync)>,
) -> Result<Evaluated> {
    let (o, d) = setup.endpoints(req)?;
    let (t, target) = (req.timestep, req.timestep + setup.spec.d);
    let field = setup.field;
    let Some(actual) = setup.speeds(|r| field.speed(r, target)) else {
        return Ok(Evaluated::Skipped);
    };
    let Some(current) = setup.speeds(|r| field.speed(r, t + setup.spec.h)) else {
        return Ok(Evaluated::Skipped);
    };
    let Some(candidates) = setup.candidates(req, forecast)? else {
        return Ok(Evaluated::Skipped);
    };

    let optimal = dijkstra(setup.graph, o, d, &actual)?;
    let naive = dijkstra(setup.graph, o, d, &current)?;
    let price = |p: &PathResult| setup.graph.path_cost(&p.edges, &actual);
    let t_optimal = optimal.cost;
    let t_naive = price(&naive)?;
    let t_predict = price(&candidates[0])?;

    let mut member = true;
    let (t_eopf, eopf_rank) = match eopf {
        Some(model) => {
            let features = setup.edge_features(&candidates, forecast);
            let choice = rerank(setup.graph, &candidates, &features, model)?;
            member = choice.index < candidates.len();
            (
                Some(price(&candidates[choice.index.min(candidates.len() - 1)])?),
                Some(choice.index),
            )
        }
        None => (None, None),
    };
    let record = RegretRecord {
        request: *req,
        t_optimal,
        t_naive,
        t_predict,
        t_eopf,
        regret_naive: regret(t_naive, t_optimal)?,
        regret_predict: regret(t_predict, t_optimal)?,
        regret_eopf: t_eopf.map(|t| regret(t, t_optimal)).transpose()?,
        eopf_rank,
    };
    Ok(Evaluated::Done(record, member))
}

/// Evaluates every request; requests are independent and run in parallel,
/// and records come back sorted by request id.
pub fn eval_navigation(
    setup: &NavSetup,
    requests: &[NavRequest],
    forecasts: &BTreeMap<usize, Vec<RoadForecast>>,
    eopf: Option<&(dyn SpeedCorrector + Sync)>,
) -> Result<NavOutcome> {
    let results = requests
        .par_iter()
        .map(|req| evaluate_one(setup, req, lookup(forecasts, req)?, eopf))
        .collect::<Result<Vec<_>>>()?;
    let mut out = NavOutcome::default();
    for r in results {
        match r {
            Evaluated::Done(record, member) => {
                out.membership_violations += usize::from(!member);
                out.records.push(record);
            }
            Evaluated::Skipped => out.skipped += 1,
        }
    }
    if out.skipped > 0 {
        log::warn!("skipped {} request(s) with unusable speeds", out.skipped);
    }
    out.records.sort_by_key(|r| r.request.id);
    Ok(out)
}

pub const BUCKET_LABELS: [&str; 5] = [">30%", "20-30%", "10-20%", "5-10%", "<5%"];

/// Bucket of a relative difference; upper bounds are inclusive, so exactly
/// 5% lands in `<5%`.
pub fn bucket(r: f64) -> usize {
    if r > 0.30 {
        0
    } else if r > 0.20 {
        1
    } else if r > 0.10 {
        2
    } else if r > 0.05 {
        3
    } else {
        4
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Buckets {
    pub counts: [usize; 5],
    /// Share of the total per bucket, in percent; all zero when empty.
    pub percent: [f64; 5],
}

impl Buckets {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let mut counts = [0usize; 5];
        for v in values {
            counts[bucket(v)] += 1;
        }
        let total: usize = counts.iter().sum();
        let percent = counts.map(|c| {
            if total == 0 {
                0.0
            } else {
                100.0 * c as f64 / total as f64
            }
        });
        Buckets { counts, percent }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NavSummary {
    pub requests: usize,
    pub evaluated: usize,
    pub skipped: usize,
    pub mean_regret_naive: f64,
    pub mean_regret_predict: f64,
    pub mean_regret_eopf: Option<f64>,
    /// Share of requests whose predicted route costs exactly the optimum.
    pub exact_match_rate: f64,
    /// Regret against the optimum, without and with EOPF.
    pub regret_predict: Buckets,
    pub regret_eopf: Option<Buckets>,
    pub eopf_better: usize,
    pub eopf_worse: usize,
    pub eopf_same: usize,
    /// Relative change `|t_predict - t_eopf| / t_predict` where EOPF helped
    /// and where it hurt.
    pub improvement_better: Option<Buckets>,
    pub improvement_worse: Option<Buckets>,
    pub membership_violations: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn summarize(outcome: &NavOutcome) -> NavSummary {
    let recs = &outcome.records;
    let n = recs.len();
    let with_eopf = !recs.is_empty() && recs.iter().all(|r| r.t_eopf.is_some());
    let mut s = NavSummary {
        requests: n + outcome.skipped,
        evaluated: n,
        skipped: outcome.skipped,
        mean_regret_naive: mean(recs.iter().map(|r| r.regret_naive)),
        mean_regret_predict: mean(recs.iter().map(|r| r.regret_predict)),
        exact_match_rate: if n == 0 {
            0.0
        } else {
            recs.iter().filter(|r| r.t_predict == r.t_optimal).count() as f64 / n as f64
        },
        regret_predict: Buckets::of(recs.iter().map(|r| r.regret_predict)),
        membership_violations: outcome.membership_violations,
        ..NavSummary::default()
    };
    if with_eopf {
        let eopf = |r: &RegretRecord| r.t_eopf.unwrap_or(r.t_predict);
        s.mean_regret_eopf = Some(mean(recs.iter().filter_map(|r| r.regret_eopf)));
        s.regret_eopf = Some(Buckets::of(recs.iter().filter_map(|r| r.regret_eopf)));
        let better: Vec<f64> = recs
            .iter()
            .filter(|r| eopf(r) < r.t_predict)
            .map(|r| (r.t_predict - eopf(r)) / r.t_predict)
            .collect();
        let worse: Vec<f64> = recs
            .iter()
            .filter(|r| eopf(r) > r.t_predict)
            .map(|r| (eopf(r) - r.t_predict) / r.t_predict)
            .collect();
        s.eopf_better = better.len();
        s.eopf_worse = worse.len();
        s.eopf_same = n - better.len() - worse.len();
        s.improvement_better = Some(Buckets::of(better));
        s.improvement_worse = Some(Buckets::of(worse));
    }
    s
}
